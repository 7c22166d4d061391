//! Wireless gain model, SINR evaluation, and power control via mobility.
//!
//! The power a follower k receives from relay i is attenuated by
//! `g_ik = K (l0 / l_ik)^beta + psi_ik / P_i`, with `psi_ik` an optional
//! log-normal shadowing term drawn once per link and step. A follower's
//! SINR is the served power over the sum of powers received from relays
//! inside its interference ball plus receiver noise.
//!
//! When a follower's SINR falls below the threshold, the controller prefers
//! shrinking the serving separation (a bias pulling the relay toward the
//! follower) and raises the relay's transmit power only to bridge the gap,
//! never beyond `p_max`. Feasibility is judged on the deterministic part of
//! the gain; realized shadowing excursions are logged, not constrained.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::Vec3;

/// Log-normal shadowing parameters of the underlying normal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Shadowing {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Antenna/attenuation constant K (dimensionless).
    pub gain_const: f64,
    /// Reference distance l0 in meters.
    pub ref_distance: f64,
    /// Path-loss exponent beta.
    pub path_loss_exp: f64,
    /// Shadowing distribution; `None` disables the random term.
    pub shadowing: Option<Shadowing>,
    /// Receiver noise power nu (default 0, the paper's simplification).
    pub noise_power: f64,
    /// SINR threshold T on a linear scale.
    pub sinr_threshold: f64,
    /// Maximum transmit power.
    pub p_max: f64,
    /// Nominal transmit power each relay starts from and relaxes back to.
    pub p_nominal: f64,
    /// Minimum separation between agents (collision constraint).
    pub l_min: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            gain_const: 1.0,
            ref_distance: 1.0,
            path_loss_exp: 2.0,
            shadowing: None,
            noise_power: 0.0,
            sinr_threshold: 1.5,
            p_max: 1e4,
            p_nominal: 1.0,
            l_min: 0.5,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.gain_const > 0.0
            && self.ref_distance > 0.0
            && self.sinr_threshold > 0.0
            && self.p_max > 0.0
            && self.p_nominal > 0.0
            && self.p_nominal <= self.p_max
            && self.l_min > 0.0
            && self.noise_power >= 0.0)
        {
            return Err(SimError::config("channel model parameters out of range"));
        }
        Ok(())
    }

    /// Deterministic part of the link gain, no separation check.
    pub fn deterministic_gain(&self, separation: f64) -> f64 {
        // Floor guards the singularity for interferers that crowd the receiver.
        let l = separation.max(1e-9);
        self.gain_const * (self.ref_distance / l).powf(self.path_loss_exp)
    }
}

/// Gain of a controlled link at `separation` meters, transmit power `power`,
/// with one shadowing draw. Controlled links must respect `l_min`.
pub fn link_gain(
    separation: f64,
    power: f64,
    model: &ChannelModel,
    shadow_sample: f64,
) -> Result<f64, SimError> {
    if separation < model.l_min {
        return Err(SimError::SeparationViolation { separation, minimum: model.l_min });
    }
    if !(power > 0.0) {
        return Err(SimError::config("transmit power must be positive"));
    }
    Ok(model.deterministic_gain(separation) + shadow_sample / power)
}

/// SINR at a follower served by relay `serving`. Interferers are the other
/// relays inside the ball of `interference_radius` around the follower.
/// `shadow(j)` supplies the per-link shadowing sample (0 when disabled).
/// Returns `f64::INFINITY` when noise is zero and no interferer is in range.
pub fn sinr_at(
    follower_pos: &Vec3,
    serving: usize,
    powers: &[f64],
    relay_positions: &[Vec3],
    interference_radius: f64,
    model: &ChannelModel,
    mut shadow: impl FnMut(usize) -> f64,
) -> Result<f64, SimError> {
    let l_serving = (follower_pos - relay_positions[serving]).norm();
    let g = link_gain(l_serving, powers[serving], model, shadow(serving))?;
    let signal = powers[serving] * g;

    let mut denom = model.noise_power;
    for (j, rp) in relay_positions.iter().enumerate() {
        if j == serving {
            continue;
        }
        let l = (follower_pos - rp).norm();
        if l <= interference_radius {
            // P_j * g_jk = P_j * deterministic + psi_jk
            denom += powers[j] * model.deterministic_gain(l) + shadow(j);
        }
    }
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal / denom)
}

/// Power-control plan for one follower link.
#[derive(Debug, Clone)]
pub struct PcPlan {
    pub follower: usize,
    pub serving: usize,
    /// Deterministic SINR at the current geometry and powers.
    pub sinr_det: f64,
    /// Largest serving separation meeting the threshold at current powers,
    /// when one exists within `[l_min, current separation)`.
    pub desired_separation: Option<f64>,
    /// Acceleration bias for the serving relay, pulling it toward the
    /// follower; zero when the constraint already holds.
    pub bias: Vec3,
    /// Transmit power that would meet the threshold at the current
    /// separation, capped at `p_max`; `None` when no raise is needed.
    pub power_needed: Option<f64>,
    /// Not satisfiable even at `l_min` separation and `p_max` power.
    pub infeasible: bool,
}

/// Evaluate the SINR constraint for every follower and plan corrections.
///
/// Uses the deterministic gain only. For an unsatisfied follower the plan
/// carries the target separation (mobility is the preferred actuator), a
/// relay bias of magnitude `k_pc` toward the follower, and the power level
/// that bridges the gap while the geometry catches up.
#[allow(clippy::too_many_arguments)]
pub fn power_control_targets(
    assignment: &[usize],
    follower_positions: &[Vec3],
    relay_positions: &[Vec3],
    powers: &[f64],
    interference_radius: f64,
    model: &ChannelModel,
    k_pc: f64,
) -> Vec<PcPlan> {
    assignment
        .iter()
        .zip(follower_positions)
        .enumerate()
        .map(|(k, (&i, fp))| {
            let l_cur = (fp - relay_positions[i]).norm();
            let mut denom = model.noise_power;
            for (j, rp) in relay_positions.iter().enumerate() {
                if j != i && (fp - rp).norm() <= interference_radius {
                    denom += powers[j] * model.deterministic_gain((fp - rp).norm());
                }
            }
            let sinr_det = if denom <= 0.0 {
                f64::INFINITY
            } else {
                powers[i] * model.deterministic_gain(l_cur) / denom
            };
            if sinr_det >= model.sinr_threshold {
                return PcPlan {
                    follower: k,
                    serving: i,
                    sinr_det,
                    desired_separation: None,
                    bias: Vec3::zeros(),
                    power_needed: None,
                    infeasible: false,
                };
            }

            let t = model.sinr_threshold;
            // Largest l with P_i K (l0/l)^beta >= T * denom.
            let l_star = model.ref_distance
                * (powers[i] * model.gain_const / (t * denom)).powf(1.0 / model.path_loss_exp);
            let desired_separation = (l_star >= model.l_min).then_some(l_star.min(l_cur));

            // Power meeting the threshold at the current separation.
            let p_now = t * denom / model.deterministic_gain(l_cur);
            let power_needed = Some(p_now.min(model.p_max));

            // Best case over the whole (separation, power) box.
            let best = model.p_max * model.deterministic_gain(model.l_min) / denom;
            let infeasible = best < t;

            let dir = fp - relay_positions[i];
            let bias =
                if dir.norm() > 1e-12 { dir / dir.norm() * k_pc } else { Vec3::zeros() };

            PcPlan {
                follower: k,
                serving: i,
                sinr_det,
                desired_separation,
                bias,
                power_needed,
                infeasible,
            }
        })
        .collect()
}

/// Linear SINR to dB; infinite stays infinite.
pub fn to_db(sinr: f64) -> f64 {
    if sinr.is_infinite() {
        f64::INFINITY
    } else {
        10.0 * sinr.log10()
    }
}
