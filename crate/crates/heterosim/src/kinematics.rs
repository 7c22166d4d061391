//! Agent state and numerical integration of the two motion models.
//!
//! Ground agents (sensors, manipulators, the adversary, foragers) follow a
//! kinematic bicycle with a first-order steering servo:
//!
//! ```text
//! x' = v cos(theta)      theta' = (v / L) tan(gamma)
//! y' = v sin(theta)      gamma' = servo_gain * (gamma_d - gamma)
//! ```
//!
//! Aerial relays are holonomic double integrators (`x'' = u`) hovering at a
//! fixed altitude, so their motion is planar with a constant z.
//!
//! Integration is semi-implicit Euler at a fixed timestep: steering first,
//! then heading from the new steering, then position from the new heading
//! (velocity first, then position for relays). All functions are pure; a
//! simulation advances states on a single logical thread.

use serde::{Deserialize, Serialize};

use crate::control::BehaviorMode;
use crate::error::SimError;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentClass {
    Relay,
    Sensor,
    Manipulator,
    Adversary,
    Forager,
    Drone,
}

impl AgentClass {
    pub fn is_nonholonomic(self) -> bool {
        matches!(
            self,
            AgentClass::Sensor | AgentClass::Manipulator | AgentClass::Adversary | AgentClass::Forager
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentClass::Relay => "relay",
            AgentClass::Sensor => "sensor",
            AgentClass::Manipulator => "manipulator",
            AgentClass::Adversary => "adversary",
            AgentClass::Forager => "forager",
            AgentClass::Drone => "drone",
        }
    }
}

/// Full kinematic state of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Position in meters. Ground agents keep z = 0; relays and drones keep
    /// a constant altitude.
    pub position: Vec3,
    /// Velocity in m/s. For ground agents this always equals
    /// `speed * [cos(heading), sin(heading), 0]`.
    pub velocity: Vec3,
    /// Heading in radians (ground agents).
    pub heading: f64,
    /// Current steering angle in radians (ground agents).
    pub steering: f64,
    /// Forward speed in m/s (ground agents).
    pub speed: f64,
    pub class: AgentClass,
    pub mode: BehaviorMode,
}

impl AgentState {
    pub fn ground(class: AgentClass, x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec3::new(x, y, 0.0),
            velocity: Vec3::zeros(),
            heading,
            steering: 0.0,
            speed: 0.0,
            class,
            mode: BehaviorMode::initial_for(class),
        }
    }

    pub fn aerial(class: AgentClass, x: f64, y: f64, altitude: f64) -> Self {
        Self {
            position: Vec3::new(x, y, altitude),
            velocity: Vec3::zeros(),
            heading: 0.0,
            steering: 0.0,
            speed: 0.0,
            class,
            mode: BehaviorMode::initial_for(class),
        }
    }
}

/// Per-class speed ceilings in m/s. The faster-relay ordering
/// `relay > sensor = manipulator` is assumed by the connectivity margin
/// computation; the scenario loader validates it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassSpeeds {
    pub relay: f64,
    pub sensor: f64,
    pub manipulator: f64,
    pub adversary: f64,
    pub forager: f64,
    pub drone: f64,
}

impl ClassSpeeds {
    pub fn for_class(&self, class: AgentClass) -> f64 {
        match class {
            AgentClass::Relay => self.relay,
            AgentClass::Sensor => self.sensor,
            AgentClass::Manipulator => self.manipulator,
            AgentClass::Adversary => self.adversary,
            AgentClass::Forager => self.forager,
            AgentClass::Drone => self.drone,
        }
    }
}

impl Default for ClassSpeeds {
    fn default() -> Self {
        // Pursuers outrun the adversary, which outruns the manipulator.
        Self {
            relay: 1.5,
            sensor: 0.8,
            manipulator: 0.8,
            adversary: 0.7,
            forager: 0.2,
            drone: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KinematicParams {
    /// Wheelbase L in meters.
    pub wheelbase: f64,
    /// Steering servo gain in 1/s.
    pub servo_gain: f64,
    /// Steering limit in radians.
    pub steer_max: f64,
    /// Fixed integration timestep in seconds.
    pub dt: f64,
    pub speeds: ClassSpeeds,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.25,
            servo_gain: 4.0,
            steer_max: 0.6,
            dt: 0.02,
            speeds: ClassSpeeds::default(),
        }
    }
}

impl KinematicParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.wheelbase > 0.0 && self.servo_gain > 0.0 && self.dt > 0.0) {
            return Err(SimError::config("wheelbase, servo_gain, dt must be positive"));
        }
        if !(self.steer_max > 0.0 && self.steer_max < std::f64::consts::FRAC_PI_2) {
            return Err(SimError::config("steer_max must lie in (0, pi/2)"));
        }
        let s = &self.speeds;
        if s.sensor != s.manipulator {
            return Err(SimError::config("sensor and manipulator speed limits must be equal"));
        }
        if !(s.relay > s.sensor) {
            return Err(SimError::config("relay speed limit must exceed follower speed limit"));
        }
        Ok(())
    }
}

/// Advance a nonholonomic agent one timestep under speed command `v` and
/// desired steering `gamma_d`.
pub fn step_bicycle(
    state: &AgentState,
    v: f64,
    gamma_d: f64,
    params: &KinematicParams,
) -> Result<AgentState, SimError> {
    if !state.class.is_nonholonomic() {
        return Err(SimError::WrongClass { expected: "nonholonomic", got: state.class.name() });
    }
    if !(v.is_finite() && gamma_d.is_finite()) || !state.position.iter().all(|c| c.is_finite()) {
        return Err(SimError::NonFinite { context: "step_bicycle" });
    }

    let v_max = params.speeds.for_class(state.class);
    let v = v.clamp(-v_max, v_max);
    let gamma_d = gamma_d.clamp(-params.steer_max, params.steer_max);
    let dt = params.dt;

    let steering = state.steering + params.servo_gain * (gamma_d - state.steering) * dt;
    if steering.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(SimError::SteeringSingularity { gamma: steering });
    }
    let heading = crate::wrap_angle(state.heading + v / params.wheelbase * steering.tan() * dt);
    let velocity = Vec3::new(v * heading.cos(), v * heading.sin(), 0.0);
    let position = state.position + velocity * dt;

    Ok(AgentState { position, velocity, heading, steering, speed: v, ..*state })
}

/// Advance a holonomic relay one timestep under acceleration `u`. Altitude
/// is held constant: the vertical component of `u` is ignored and the
/// vertical velocity stays zero.
pub fn step_double_integrator(
    state: &AgentState,
    u: Vec3,
    params: &KinematicParams,
) -> Result<AgentState, SimError> {
    if state.class != AgentClass::Relay && state.class != AgentClass::Drone {
        return Err(SimError::WrongClass { expected: "relay", got: state.class.name() });
    }
    if !u.iter().all(|c| c.is_finite()) || !state.position.iter().all(|c| c.is_finite()) {
        return Err(SimError::NonFinite { context: "step_double_integrator" });
    }

    let dt = params.dt;
    let mut velocity = state.velocity + u * dt;
    velocity.z = 0.0;
    let v_max = params.speeds.for_class(state.class);
    let n = velocity.norm();
    if n > v_max {
        velocity *= v_max / n;
    }
    let position = state.position + velocity * dt;

    Ok(AgentState { position, velocity, ..*state })
}
