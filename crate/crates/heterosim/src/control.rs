//! Per-class behavioral modes and control laws.
//!
//! Relays obey a virtual spring-damper over their Gabriel neighbors with an
//! attractive potential toward the target region, switching to a follower
//! law when an assigned agent strays into the outer communication band.
//! Sensors tether, search, or pursue; manipulators tether, search, or
//! manipulate; the adversary patrols the target perimeter, chases
//! manipulators, and evades sensors.
//!
//! Holonomic vector laws are mapped onto bicycle commands by pure pursuit:
//! `v = |u| * speed_gain` (clamped by the integrator to the class limit)
//! and `gamma_d` equal to the bearing error clamped into the steering range.
//! All laws are pure functions of the step snapshot; the engine evaluates
//! every agent before mutating any state.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{AgentClass, AgentState};
use crate::sensing::{GroundVision, ObstacleField};
use crate::topology::GoalRegion;
use crate::{wrap_angle, Vec3};

/// Behavioral mode of an agent. Which variants are reachable depends on the
/// agent class; guards keep them mutually exclusive per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BehaviorMode {
    /// Relay: spring-damper network expansion.
    SpringMass,
    /// Relay: following a strayed assigned agent.
    Follower,
    /// Sensor/manipulator: spring tether back toward the assigned relay.
    Tether,
    /// Sensor/manipulator: random-walk goals in the safe annulus.
    Search,
    /// Sensor: chasing a detected adversary.
    Pursuit,
    /// Manipulator: driving the end effector onto the detected target.
    Manipulate,
    /// Adversary: circling the protected target.
    Patrol,
    /// Adversary: fleeing nearby sensors.
    Evade,
    /// Foraging-scenario agents manage their own phase machine.
    Idle,
}

impl BehaviorMode {
    pub fn initial_for(class: AgentClass) -> Self {
        match class {
            AgentClass::Relay => BehaviorMode::SpringMass,
            AgentClass::Sensor | AgentClass::Manipulator => BehaviorMode::Tether,
            AgentClass::Adversary => BehaviorMode::Patrol,
            AgentClass::Forager | AgentClass::Drone => BehaviorMode::Idle,
        }
    }

    /// Short code used in the step log.
    pub fn code(self) -> &'static str {
        match self {
            BehaviorMode::SpringMass => "SM",
            BehaviorMode::Follower => "FO",
            BehaviorMode::Tether => "TE",
            BehaviorMode::Search => "SE",
            BehaviorMode::Pursuit => "PU",
            BehaviorMode::Manipulate => "MA",
            BehaviorMode::Patrol => "PA",
            BehaviorMode::Evade => "EV",
            BehaviorMode::Idle => "ID",
        }
    }
}

/// Pure-pursuit mapping of vector commands onto bicycle inputs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteeringParams {
    /// Speed per unit command magnitude (k_v).
    pub speed_gain: f64,
    /// Steering clamp, matching the kinematic limit.
    pub steer_max: f64,
}

impl Default for SteeringParams {
    fn default() -> Self {
        Self { speed_gain: 4.0, steer_max: 0.6 }
    }
}

/// Map a world-frame command vector to `(v, gamma_d)`.
pub fn steer_toward(u: &Vec3, state: &AgentState, params: &SteeringParams) -> (f64, f64) {
    let mag = (u.x * u.x + u.y * u.y).sqrt();
    if mag < 1e-12 {
        return (0.0, 0.0);
    }
    let bearing_error = wrap_angle(u.y.atan2(u.x) - state.heading);
    let gamma_d = bearing_error.clamp(-params.steer_max, params.steer_max);
    (mag * params.speed_gain, gamma_d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlParams {
    /// Spring constant per Gabriel edge (symmetric).
    pub spring_k: f64,
    /// Relay velocity damping.
    pub damping: f64,
    /// Attractive potential gain toward the target region.
    pub attract_gain: f64,
    /// Known center of the target region.
    pub attract_center: (f64, f64),
    /// Follower/pursuit/manipulation attraction gain.
    pub alpha: f64,
    /// Relay location broadcast period (the Delta-t of the goal margin).
    pub broadcast_period: f64,
    /// Search goals are resampled after this long, or on arrival.
    pub goal_resample_period: f64,
    /// Pursuit capture radius.
    pub capture_radius: f64,
    /// Seconds without re-detection before a pursuer gives up.
    pub lost_timeout: f64,
    /// Adversary patrol circle radius around the target.
    pub patrol_radius: f64,
    /// Adversary flees sensors inside this range.
    pub evade_radius: f64,
    /// Adversary chases manipulators inside this range.
    pub adversary_sense_radius: f64,
    /// Manipulation success radius.
    pub manip_success_radius: f64,
    pub steering: SteeringParams,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            spring_k: 2.0,
            damping: 3.0,
            attract_gain: 0.05,
            attract_center: (0.0, 0.0),
            alpha: 1.0,
            broadcast_period: 0.5,
            goal_resample_period: 5.0,
            capture_radius: 0.2,
            lost_timeout: 2.0,
            patrol_radius: 2.0,
            evade_radius: 3.0,
            adversary_sense_radius: 6.0,
            manip_success_radius: 0.1,
            steering: SteeringParams::default(),
        }
    }
}

/// Spring-mass acceleration for relay `i` (index into `positions`, which
/// includes the base node). `extra` superposes obstacle repulsion and any
/// power-control bias; the order of terms is irrelevant.
pub fn relay_control(
    i: usize,
    positions: &[Vec3],
    velocity: &Vec3,
    spring_edges: &BTreeSet<(usize, usize)>,
    rest_length: f64,
    params: &ControlParams,
    extra: Vec3,
) -> Vec3 {
    let mut u = Vec3::zeros();
    for &(a, b) in spring_edges {
        let j = if a == i {
            b
        } else if b == i {
            a
        } else {
            continue;
        };
        let d = positions[j] - positions[i];
        let len = d.norm();
        if len > 1e-12 {
            u += d / len * (params.spring_k * (len - rest_length));
        }
    }
    u -= velocity * params.damping;
    let c = Vec3::new(params.attract_center.0, params.attract_center.1, positions[i].z);
    u -= (positions[i] - c) * params.attract_gain;
    u + extra
}

/// Relay mode guard: follower mode iff some assigned agent sits in the band
/// `(rest_radius, comm_radius)`; the relay then tracks the farthest one.
pub fn relay_mode_guard(
    i: usize,
    assignment: &[usize],
    relay_positions: &[Vec3],
    follower_positions: &[Vec3],
    rest_radius: f64,
    comm_radius: f64,
) -> (BehaviorMode, Option<usize>) {
    let mut farthest: Option<(usize, f64)> = None;
    for (k, &r) in assignment.iter().enumerate() {
        if r != i {
            continue;
        }
        let d = (follower_positions[k] - relay_positions[i]).norm();
        if d > rest_radius && d < comm_radius {
            match farthest {
                Some((_, dd)) if dd >= d => {}
                _ => farthest = Some((k, d)),
            }
        }
    }
    match farthest {
        Some((k, _)) => (BehaviorMode::Follower, Some(k)),
        None => (BehaviorMode::SpringMass, None),
    }
}

/// Follower-mode relay acceleration toward a strayed agent.
pub fn relay_follow_control(relay_pos: &Vec3, follower_pos: &Vec3, alpha: f64) -> Vec3 {
    let mut d = follower_pos - relay_pos;
    d.z = 0.0;
    d * alpha
}

/// A detection latch: last confirmed position and time.
#[derive(Debug, Clone, Copy)]
pub struct DetectionTrack {
    pub position: Vec3,
    pub last_seen: f64,
}

/// Persistent controller state for one sensor or manipulator.
#[derive(Debug, Clone, Default)]
pub struct FollowerCtl {
    pub goal: Option<Vec3>,
    pub goal_deadline: f64,
    pub track: Option<DetectionTrack>,
}

/// Command produced by a behavior policy.
#[derive(Debug, Clone, Copy)]
pub struct Command {
    pub v: f64,
    pub gamma_d: f64,
    pub mode: BehaviorMode,
    /// The world-frame vector law behind the command.
    pub u: Vec3,
}

/// Sensor/manipulator shared mode machine. Priority: an active detection
/// wins (pursuit for sensors, manipulation handled by the caller), then the
/// tether branch inside the bidirectional range, then annulus search.
///
/// `goal_ok` vetoes candidate search goals and `bias` superposes onto the
/// tether/search laws; the power controller uses both to keep followers out
/// of regions where the SINR constraint cannot hold (separation adjustment
/// through the follower's own motion).
#[allow(clippy::too_many_arguments)]
pub fn sensor_control<R: Rng>(
    state: &AgentState,
    relay_position: &Vec3,
    follower_range: f64,
    region: &GoalRegion,
    obstacles: &ObstacleField,
    params: &ControlParams,
    ctl: &mut FollowerCtl,
    vision: &GroundVision,
    now: f64,
    rng: &mut R,
    goal_ok: impl Fn(&Vec3) -> bool,
    bias: Vec3,
) -> Command {
    if let Some(track) = ctl.track {
        if now - track.last_seen <= params.lost_timeout {
            return pursuit_control(state, &track.position, vision, params);
        }
        ctl.track = None;
    }

    let dist = (state.position - relay_position).norm();
    if dist <= follower_range {
        // Spring tether with rest length at the bidirectional range.
        let dir = (relay_position - state.position) / dist.max(1e-12);
        let u = dir * (params.spring_k * (dist - follower_range))
            - state.velocity * params.damping
            + bias;
        let (v, gamma_d) = steer_toward(&u, state, &params.steering);
        ctl.goal = None;
        return Command { v, gamma_d, mode: BehaviorMode::Tether, u };
    }

    // Search: keep a goal inside the safe annulus, resampled on expiry,
    // arrival, or when relay motion invalidated it.
    let need_new = match ctl.goal {
        Some(g) => {
            now >= ctl.goal_deadline
                || (g - state.position).norm() < 0.2
                || !region.contains_search(&g)
                || !goal_ok(&g)
        }
        None => true,
    };
    if need_new {
        ctl.goal = sample_clear_goal(region, obstacles, rng, &goal_ok);
        ctl.goal_deadline = now + params.goal_resample_period;
    }
    match ctl.goal {
        Some(goal) => {
            let u = (goal - state.position) * params.alpha + bias;
            let (v, gamma_d) = steer_toward(&u, state, &params.steering);
            Command { v, gamma_d, mode: BehaviorMode::Search, u }
        }
        None => {
            // Annulus blocked: re-tether toward the relay.
            let mut u = (relay_position - state.position) * params.alpha + bias;
            u.z = 0.0;
            let (v, gamma_d) = steer_toward(&u, state, &params.steering);
            Command { v, gamma_d, mode: BehaviorMode::Search, u }
        }
    }
}

/// Sample a search goal outside every obstacle's inner band and acceptable
/// to the goal veto.
fn sample_clear_goal<R: Rng>(
    region: &GoalRegion,
    obstacles: &ObstacleField,
    rng: &mut R,
    goal_ok: impl Fn(&Vec3) -> bool,
) -> Option<Vec3> {
    for _ in 0..32 {
        let goal = region.sample_search_ground(rng)?;
        if !goal_ok(&goal) {
            continue;
        }
        match obstacles.clearance(&goal) {
            Ok((d, _)) if d > obstacles.inner_radius => return Some(goal),
            Ok(_) | Err(_) => continue,
        }
    }
    None
}

/// Pursuit law. Beyond the vision mid-range the field-of-view centroid is
/// driven onto the target; inside it the attraction is direct.
pub fn pursuit_control(
    state: &AgentState,
    target: &Vec3,
    vision: &GroundVision,
    params: &ControlParams,
) -> Command {
    let range = crate::planar_distance(target, &state.position);
    let u = if range > vision.mid_range() {
        (target - vision.centroid(state)) * params.alpha
    } else {
        (target - state.position) * params.alpha
    };
    let (v, gamma_d) = steer_toward(&u, state, &params.steering);
    Command { v, gamma_d, mode: BehaviorMode::Pursuit, u }
}

/// Adversary policy: flee nearby sensors; otherwise chase the nearest
/// manipulator in sensing range; otherwise circle the protected target.
pub fn adversary_policy(
    state: &AgentState,
    target_center: &Vec3,
    manipulators: &[Vec3],
    sensors: &[Vec3],
    params: &ControlParams,
) -> Command {
    let close_sensors: Vec<&Vec3> = sensors
        .iter()
        .filter(|s| crate::planar_distance(s, &state.position) < params.evade_radius)
        .collect();

    if !close_sensors.is_empty() {
        let mut u = Vec3::zeros();
        for s in close_sensors {
            let d = state.position - *s;
            let dist = d.norm().max(1e-9);
            u += d / dist * (params.alpha * (params.evade_radius - dist).max(0.0));
        }
        u.z = 0.0;
        let (v, gamma_d) = steer_toward(&u, state, &params.steering);
        return Command { v, gamma_d, mode: BehaviorMode::Evade, u };
    }

    let chase = manipulators
        .iter()
        .map(|m| (m, crate::planar_distance(m, &state.position)))
        .filter(|(_, d)| *d < params.adversary_sense_radius)
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    if let Some((m, _)) = chase {
        let mut u = (m - state.position) * params.alpha;
        u.z = 0.0;
        let (v, gamma_d) = steer_toward(&u, state, &params.steering);
        return Command { v, gamma_d, mode: BehaviorMode::Patrol, u };
    }

    // Patrol: pure pursuit of a carrot ahead on the circle.
    let rel = state.position - target_center;
    let phi = rel.y.atan2(rel.x);
    let lookahead = 0.25;
    let carrot = target_center
        + Vec3::new(
            params.patrol_radius * (phi + lookahead).cos(),
            params.patrol_radius * (phi + lookahead).sin(),
            0.0,
        );
    let u = (carrot - state.position) * params.alpha;
    let (v, gamma_d) = steer_toward(&u, state, &params.steering);
    Command { v, gamma_d, mode: BehaviorMode::Patrol, u }
}
