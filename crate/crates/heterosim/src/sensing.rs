//! Probabilistic detection fields and the obstacle repulsion potential.
//!
//! Detection intensities follow a normal density over distance from the
//! field's sweet spot. The density can exceed 1 for small spreads, so the
//! returned detection probability is the density clamped to [0, 1]; the
//! unclamped value is available through `gaussian_intensity`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::kinematics::AgentState;
use crate::{wrap_angle, Vec3};

/// Downward-looking circular field of an aerial agent, centered on the
/// ground projection of its position. Valid while the altitude is constant.
#[derive(Debug, Clone, Copy)]
pub struct AerialVision {
    /// Footprint centroid (ground projection).
    pub centroid: Vec3,
    /// Standard deviation of the detection field (phi).
    pub spread: f64,
    /// Maximum vision range (Xi).
    pub max_range: f64,
}

/// Forward annular-sector field of a ground agent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundVision {
    /// Standard deviation of the detection field (phi).
    pub spread: f64,
    /// Maximum perceptible distance (Xi).
    pub max_range: f64,
    /// Minimum perceptible distance (xi).
    pub min_range: f64,
    /// Half viewing angle in radians.
    pub half_angle: f64,
}

impl GroundVision {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.spread > 0.0
            && self.max_range > self.min_range
            && self.min_range >= 0.0
            && self.half_angle > 0.0
            && self.half_angle <= std::f64::consts::PI)
        {
            return Err(SimError::config("ground vision parameters out of range"));
        }
        Ok(())
    }

    /// Midpoint of the perceptible range band, where detection peaks.
    pub fn mid_range(&self) -> f64 {
        0.5 * (self.max_range + self.min_range)
    }

    /// Field-of-view centroid in world coordinates for an agent pose.
    pub fn centroid(&self, state: &AgentState) -> Vec3 {
        state.position
            + Vec3::new(
                self.mid_range() * state.heading.cos(),
                self.mid_range() * state.heading.sin(),
                0.0,
            )
    }
}

/// Normal density at distance `dist` with standard deviation `spread`.
pub fn gaussian_intensity(dist: f64, spread: f64) -> f64 {
    let z = dist / spread;
    (-0.5 * z * z).exp() / (spread * std::f64::consts::TAU.sqrt())
}

/// Detection probability of a target under an aerial field: normal falloff
/// from the footprint centroid, zero beyond the vision range.
pub fn detect_prob_aerial(target: &Vec3, field: &AerialVision) -> f64 {
    let d = (target - field.centroid).norm();
    if d > field.max_range {
        return 0.0;
    }
    gaussian_intensity(d, field.spread).clamp(0.0, 1.0)
}

/// Detection probability of a target for a ground agent: zero outside the
/// annular sector, otherwise a normal falloff around the mid-range point of
/// the boresight. The near and far halves of the band share the falloff,
/// which makes the profile unimodal with its peak at mid-range.
pub fn detect_prob_ground(target: &Vec3, state: &AgentState, field: &GroundVision) -> f64 {
    let delta = target - state.position;
    let range = (delta.x * delta.x + delta.y * delta.y).sqrt();
    if range < field.min_range || range > field.max_range {
        return 0.0;
    }
    let bearing = wrap_angle(delta.y.atan2(delta.x) - state.heading);
    if bearing.abs() > field.half_angle {
        return 0.0;
    }
    let mid = field.mid_range();
    let offset = if range > mid { range - mid } else { mid - range };
    gaussian_intensity(offset, field.spread).clamp(0.0, 1.0)
}

/// Bernoulli draw against a detection probability.
pub fn sample_detection<R: Rng>(rng: &mut R, p: f64) -> Result<bool, SimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::BadProbability { p });
    }
    Ok(rng.random::<f64>() < p)
}

/// Convex polygonal obstacle, vertices in counterclockwise order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<(f64, f64)>,
}

impl ConvexPolygon {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { vertices: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)] }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.vertices.len() < 3 {
            return Err(SimError::config("polygon needs at least 3 vertices"));
        }
        let n = self.vertices.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            area2 += x0 * y1 - x1 * y0;
        }
        if area2 <= 1e-12 {
            return Err(SimError::config(
                "polygon must be non-degenerate with counterclockwise vertices",
            ));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0.0 {
                return false;
            }
        }
        true
    }

    /// Shortest distance from an exterior point to the boundary, with the
    /// closest boundary point.
    pub fn distance(&self, x: f64, y: f64) -> (f64, (f64, f64)) {
        let n = self.vertices.len();
        let mut best = (f64::INFINITY, (0.0, 0.0));
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let abx = b.0 - a.0;
            let aby = b.1 - a.1;
            let len_sq = abx * abx + aby * aby;
            let t = if len_sq > 0.0 {
                (((x - a.0) * abx + (y - a.1) * aby) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let cx = a.0 + t * abx;
            let cy = a.1 + t * aby;
            let d = ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt();
            if d < best.0 {
                best = (d, (cx, cy));
            }
        }
        best
    }
}

/// Repulsive potential band around polygonal obstacles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleField {
    pub obstacles: Vec<ConvexPolygon>,
    /// Repulsion constant eta.
    pub eta: f64,
    /// Outer influence radius (force is zero beyond it).
    pub outer_radius: f64,
    /// Inner cutoff radius (the stated zero-force branch; the simulation
    /// raises a collision event if an agent ever gets this close).
    pub inner_radius: f64,
    /// Reference distance rho_0 of the potential.
    pub ref_distance: f64,
}

impl ObstacleField {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.inner_radius > 0.0
            && self.outer_radius > self.inner_radius
            && self.eta >= 0.0
            && self.ref_distance > 0.0)
        {
            return Err(SimError::config("obstacle field radii out of range"));
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    /// Minimum distance to any obstacle and the closest boundary point, or
    /// the index of a penetrated obstacle.
    pub fn clearance(&self, x: &Vec3) -> Result<(f64, (f64, f64)), usize> {
        let mut best = (f64::INFINITY, (0.0, 0.0));
        for (idx, o) in self.obstacles.iter().enumerate() {
            if o.contains(x.x, x.y) {
                return Err(idx);
            }
            let (d, c) = o.distance(x.x, x.y);
            if d < best.0 {
                best = (d, c);
            }
        }
        Ok(best)
    }

    /// Potential value at clearance rho (within the active band).
    pub fn potential(&self, rho: f64) -> f64 {
        if rho < self.inner_radius || rho > self.outer_radius {
            0.0
        } else {
            0.5 * self.eta * (1.0 / rho - 1.0 / self.ref_distance).powi(2)
        }
    }
}

/// Repulsive force at `x`: the negative gradient of the obstacle potential.
/// Zero outside the band `[inner_radius, outer_radius]`; points away from
/// the nearest obstacle inside it. Positions inside an obstacle are a
/// penetration error (the simulation treats that as a collision event).
pub fn obstacle_repulsion(x: &Vec3, field: &ObstacleField) -> Result<Vec3, SimError> {
    if field.obstacles.is_empty() {
        return Ok(Vec3::zeros());
    }
    let (rho, closest) =
        field.clearance(x).map_err(|obstacle| SimError::ObstaclePenetration { obstacle })?;
    if rho < field.inner_radius || rho > field.outer_radius || rho == 0.0 {
        return Ok(Vec3::zeros());
    }
    let magnitude = field.eta * (1.0 / rho - 1.0 / field.ref_distance) / (rho * rho);
    let dir = Vec3::new(x.x - closest.0, x.y - closest.1, 0.0) / rho;
    Ok(dir * magnitude)
}
