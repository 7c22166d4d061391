//! Manipulability and the manipulation-mode control law.
//!
//! Manipulability is the product of the singular values of the arm
//! Jacobian. For the shipped two-link planar arm this reduces to
//! `l1 * l2 * |sin(theta2)|`, maximized at `theta2 = +-pi/2`; the body is
//! servoed so that the manipulability-optimal end-effector point lands on
//! the target while the arm snaps to the optimal configuration.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::control::{steer_toward, SteeringParams};
use crate::kinematics::AgentState;
use crate::Vec3;

/// Articulated arm on a manipulator robot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_lengths: Vec<f64>,
    pub joint_angles: Vec<f64>,
    /// Mount point in the robot frame (top, frontal position).
    pub mount_offset: (f64, f64),
}

impl ArmModel {
    pub fn planar2(l1: f64, l2: f64) -> Self {
        Self { link_lengths: vec![l1, l2], joint_angles: vec![0.0, 0.0], mount_offset: (0.1, 0.0) }
    }
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::planar2(0.3, 0.25)
    }
}

/// End-effector position of a two-link planar arm in the mount frame.
pub fn forward_planar2(arm: &ArmModel, a1: f64, a2: f64) -> (f64, f64) {
    let l1 = arm.link_lengths[0];
    let l2 = arm.link_lengths[1];
    (l1 * a1.cos() + l2 * (a1 + a2).cos(), l1 * a1.sin() + l2 * (a1 + a2).sin())
}

/// End-effector Jacobian of the two-link planar arm at its current joint
/// angles: column i is the derivative of the end-effector position with
/// respect to joint i.
pub fn jacobian_planar2(arm: &ArmModel) -> Matrix2<f64> {
    assert_eq!(arm.link_lengths.len(), 2, "planar Jacobian requires a two-link arm");
    let l1 = arm.link_lengths[0];
    let l2 = arm.link_lengths[1];
    let a1 = arm.joint_angles[0];
    let a12 = a1 + arm.joint_angles[1];
    Matrix2::new(
        -l1 * a1.sin() - l2 * a12.sin(),
        -l2 * a12.sin(),
        l1 * a1.cos() + l2 * a12.cos(),
        l2 * a12.cos(),
    )
}

/// Manipulability: the product of the singular values of the Jacobian.
/// Rank-deficient Jacobians yield 0 (a singular configuration).
pub fn manipulability(jacobian: &DMatrix<f64>) -> f64 {
    jacobian.clone().singular_values().iter().product()
}

/// Convenience for square 2x2 Jacobians.
pub fn manipulability2(jacobian: &Matrix2<f64>) -> f64 {
    manipulability(&DMatrix::from_column_slice(2, 2, jacobian.as_slice()))
}

/// Arm configuration chosen for a manipulation attempt.
#[derive(Debug, Clone)]
pub struct ArmConfig {
    /// Joint angles in the robot frame; the elbow is bent at +-pi/2.
    pub joint_angles: [f64; 2],
    /// World position of the end effector at that configuration.
    pub end_effector: Vec3,
    /// Whether the target lies inside the general reach annulus
    /// `[|l1 - l2|, l1 + l2]`; when false the end effector is the nearest
    /// reachable projection along the target bearing.
    pub target_in_reach: bool,
}

/// Mount point of the arm in world coordinates for a robot pose.
pub fn mount_position(arm: &ArmModel, state: &AgentState) -> Vec3 {
    let (mx, my) = arm.mount_offset;
    let c = state.heading.cos();
    let s = state.heading.sin();
    state.position + Vec3::new(mx * c - my * s, mx * s + my * c, 0.0)
}

/// Optimal-manipulability arm configuration facing a target: the elbow is
/// bent at pi/2 (sign toward the target's side of the heading axis) and the
/// end effector sits on the mount-to-target ray at the fixed optimal reach
/// `sqrt(l1^2 + l2^2)`.
pub fn best_arm_config(arm: &ArmModel, state: &AgentState, target: &Vec3) -> ArmConfig {
    let l1 = arm.link_lengths[0];
    let l2 = arm.link_lengths[1];
    let mount = mount_position(arm, state);
    let delta = target - mount;
    let dist = (delta.x * delta.x + delta.y * delta.y).sqrt();
    let bearing = if dist > 1e-12 { delta.y.atan2(delta.x) } else { state.heading };

    // Elbow sign: bend toward the target's side of the heading axis.
    let lateral = crate::wrap_angle(bearing - state.heading);
    let sign = if lateral >= 0.0 { 1.0 } else { -1.0 };

    let reach = (l1 * l1 + l2 * l2).sqrt();
    // End-effector bearing = a1 + sign * atan2(l2, l1).
    let a1_world = bearing - sign * l2.atan2(l1);
    let a1 = crate::wrap_angle(a1_world - state.heading);
    let theta2 = sign * std::f64::consts::FRAC_PI_2;

    let end_effector = mount + Vec3::new(reach * bearing.cos(), reach * bearing.sin(), 0.0);
    let target_in_reach = dist >= (l1 - l2).abs() && dist <= l1 + l2;

    ArmConfig { joint_angles: [a1, theta2], end_effector, target_in_reach }
}

/// Outcome of the manipulation-mode control law.
#[derive(Debug, Clone)]
pub struct ManipulationCommand {
    pub v: f64,
    pub gamma_d: f64,
    /// End effector is within `success_radius` of the target.
    pub success: bool,
    pub config: ArmConfig,
}

/// Drive the body so that the manipulability-optimal end-effector point
/// coincides with the target.
pub fn manipulation_control(
    state: &AgentState,
    target: &Vec3,
    arm: &ArmModel,
    alpha: f64,
    success_radius: f64,
    steering: &SteeringParams,
) -> ManipulationCommand {
    let config = best_arm_config(arm, state, target);
    let error = target - config.end_effector;
    let success = error.norm() < success_radius;
    let command = error * alpha;
    let (v, gamma_d) = if success {
        (0.0, 0.0)
    } else {
        steer_toward(&command, state, steering)
    };
    ManipulationCommand { v, gamma_d, success, config }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::AgentClass;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobian_at_zero_angles() {
        let arm = ArmModel::planar2(0.4, 0.3);
        let j = jacobian_planar2(&arm);
        assert_relative_eq!(j[(0, 0)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(j[(0, 1)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(j[(1, 0)], 0.7, epsilon = 1e-15);
        assert_relative_eq!(j[(1, 1)], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-7;
        for _ in 0..50 {
            let mut arm = ArmModel::planar2(0.5, 0.35);
            let a1: f64 = rng.random_range(-3.0..3.0);
            let a2: f64 = rng.random_range(-3.0..3.0);
            arm.joint_angles = vec![a1, a2];
            let j = jacobian_planar2(&arm);
            for col in 0..2 {
                let (mut ap, mut am) = ((a1, a2), (a1, a2));
                if col == 0 {
                    ap.0 += h;
                    am.0 -= h;
                } else {
                    ap.1 += h;
                    am.1 -= h;
                }
                let fp = forward_planar2(&arm, ap.0, ap.1);
                let fm = forward_planar2(&arm, am.0, am.1);
                let dx = (fp.0 - fm.0) / (2.0 * h);
                let dy = (fp.1 - fm.1) / (2.0 * h);
                assert_relative_eq!(j[(0, col)], dx, max_relative = 1e-5, epsilon = 1e-7);
                assert_relative_eq!(j[(1, col)], dy, max_relative = 1e-5, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn jacobian_periodic_in_joint_angles() {
        let mut arm = ArmModel::planar2(0.4, 0.3);
        arm.joint_angles = vec![0.7, -1.1];
        let j = jacobian_planar2(&arm);
        arm.joint_angles = vec![0.7 + std::f64::consts::TAU, -1.1];
        let j2 = jacobian_planar2(&arm);
        assert_relative_eq!((j - j2).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn manipulability_identity() {
        let j = DMatrix::<f64>::identity(2, 2);
        assert_relative_eq!(manipulability(&j), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn manipulability_closed_form_over_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let l1: f64 = rng.random_range(0.1..1.0);
            let l2: f64 = rng.random_range(0.1..1.0);
            let mut arm = ArmModel::planar2(l1, l2);
            let theta2: f64 = rng.random_range(-3.1..3.1);
            arm.joint_angles = vec![rng.random_range(-3.1..3.1), theta2];
            let mu = manipulability2(&jacobian_planar2(&arm));
            let expected = l1 * l2 * theta2.sin().abs();
            assert_relative_eq!(mu, expected, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn folded_arm_is_singular() {
        let mut arm = ArmModel::planar2(0.4, 0.3);
        arm.joint_angles = vec![0.9, 0.0];
        assert_relative_eq!(manipulability2(&jacobian_planar2(&arm)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn right_angle_maximizes_manipulability() {
        let arm = ArmModel::planar2(0.4, 0.3);
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut theta = -std::f64::consts::PI;
        while theta <= std::f64::consts::PI {
            let mut a = arm.clone();
            a.joint_angles = vec![0.0, theta];
            let mu = manipulability2(&jacobian_planar2(&a));
            if mu > best.1 {
                best = (theta, mu);
            }
            theta += 1e-3;
        }
        assert!(
            (best.0.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-3,
            "argmax at {}",
            best.0
        );
    }

    fn manipulator_at(x: f64, y: f64, heading: f64) -> AgentState {
        AgentState::ground(AgentClass::Manipulator, x, y, heading)
    }

    #[test]
    fn best_config_reaches_optimal_manipulability() {
        let arm = ArmModel::planar2(1.0, 1.0);
        let state = manipulator_at(0.0, 0.0, 0.0);
        let cfg = best_arm_config(&arm, &state, &Vec3::new(2.0, 0.5, 0.0));
        let mut check = arm.clone();
        check.joint_angles = cfg.joint_angles.to_vec();
        let mu = manipulability2(&jacobian_planar2(&check));
        assert_relative_eq!(mu, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn best_config_beats_random_configs() {
        let arm = ArmModel::planar2(0.5, 0.3);
        let state = manipulator_at(0.0, 0.0, 0.3);
        let cfg = best_arm_config(&arm, &state, &Vec3::new(1.0, 1.0, 0.0));
        let mut at_cfg = arm.clone();
        at_cfg.joint_angles = cfg.joint_angles.to_vec();
        let best_mu = manipulability2(&jacobian_planar2(&at_cfg));
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let mut random = arm.clone();
            random.joint_angles =
                vec![rng.random_range(-3.1..3.1), rng.random_range(-3.1..3.1)];
            let mu = manipulability2(&jacobian_planar2(&random));
            assert!(mu <= best_mu + 1e-12);
        }
    }

    #[test]
    fn exact_reach_target_touched() {
        let arm = ArmModel::planar2(0.6, 0.45);
        let state = manipulator_at(0.0, 0.0, 0.0);
        let mount = mount_position(&arm, &state);
        let reach = (0.6f64 * 0.6 + 0.45 * 0.45).sqrt();
        let target = mount + Vec3::new(reach * 0.8f64.cos(), reach * 0.8f64.sin(), 0.0);
        let cfg = best_arm_config(&arm, &state, &target);
        assert!((cfg.end_effector - target).norm() < 1e-6);
        assert!(cfg.target_in_reach);
        // Forward kinematics from the returned joints lands on the same point.
        let (ex, ey) = forward_planar2(&arm, cfg.joint_angles[0], cfg.joint_angles[1]);
        let world = mount + Vec3::new(ex, ey, 0.0); // heading is 0 here
        assert!((world - cfg.end_effector).norm() < 1e-9);
    }

    #[test]
    fn control_zero_command_on_success() {
        let arm = ArmModel::planar2(0.3, 0.25);
        let state = manipulator_at(0.0, 0.0, 0.0);
        let cfg = best_arm_config(&arm, &state, &Vec3::new(1.0, 0.0, 0.0));
        // Put the target exactly at the optimal end-effector point.
        let target = cfg.end_effector;
        let cmd = manipulation_control(
            &state,
            &target,
            &arm,
            1.0,
            0.1,
            &SteeringParams::default(),
        );
        assert!(cmd.success);
        assert_eq!(cmd.v, 0.0);
        assert_eq!(cmd.gamma_d, 0.0);
    }

    #[test]
    fn control_drives_forward_to_target_ahead() {
        let arm = ArmModel::planar2(0.3, 0.25);
        let state = manipulator_at(0.0, 0.0, 0.0);
        let cmd = manipulation_control(
            &state,
            &Vec3::new(1.0, 0.0, 0.0),
            &arm,
            1.0,
            0.05,
            &SteeringParams::default(),
        );
        assert!(!cmd.success);
        assert!(cmd.v > 0.0);
        assert_relative_eq!(cmd.gamma_d, 0.0, epsilon = 1e-9);
    }
}
