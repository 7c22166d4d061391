//! Deterministic, seedable discrete-time simulator for heterogeneous robot
//! teams.
//!
//! Two scenario families are supported:
//!
//! - **Exploration / pursuit-evasion**: holonomic aerial relays expand a
//!   communication network over a cluttered workspace using virtual
//!   spring-damper forces, while nonholonomic sensor and manipulator agents
//!   search toroidal regions around their assigned relay, pursue an
//!   adversary, and manipulate a fixed target. Link quality is modeled with
//!   a path-loss + shadowing gain and a SINR threshold that the network
//!   satisfies by adjusting separations (power control via mobility).
//! - **Foraging**: ant-inspired ground robots collect tags from a small
//!   arena using correlated random walks, site fidelity, and pheromone
//!   waypoints, optionally coordinated by an aerial drone running a
//!   deterministic grid search. Behavior parameters form a 13-gene genome
//!   tuned by a genetic algorithm.
//!
//! Every run is bit-reproducible given a scenario config and a seed. One
//! simulation instance is advanced by a single logical thread; batch and GA
//! evaluations run independent instances in parallel.

pub mod channel;
pub mod control;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod foraging;
pub mod kinematics;
pub mod manipulation;
pub mod metrics;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod stats;
pub mod topology;

pub use error::SimError;

/// 3-vector used for positions, velocities, and forces (meters, m/s, m/s²).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Planar (x, y) distance between two points, ignoring z.
pub fn planar_distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}
