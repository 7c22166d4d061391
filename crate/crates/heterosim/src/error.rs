//! Error type shared across the simulator.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("steering angle {gamma} rad reached the tan singularity (|gamma| >= pi/2)")]
    SteeringSingularity { gamma: f64 },

    #[error("operation requires agent class {expected}, got {got}")]
    WrongClass { expected: &'static str, got: &'static str },

    #[error("duplicate relay positions at indices {a} and {b}")]
    DuplicatePosition { a: usize, b: usize },

    #[error("follower {follower} has no relay within comm radius {radius} m")]
    OrphanFollower { follower: usize, radius: f64 },

    #[error("goal region empty: connect radius {connect} <= search inner radius {inner}")]
    EmptyGoalRegion { connect: f64, inner: f64 },

    #[error("link separation {separation} m below minimum {minimum} m")]
    SeparationViolation { separation: f64, minimum: f64 },

    #[error("probability {p} outside [0, 1]")]
    BadProbability { p: f64 },

    #[error("position inside obstacle {obstacle}")]
    ObstaclePenetration { obstacle: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("initial connectivity violated; disconnected agents: {0:?}")]
    InitialConnectivity(Vec<String>),

    #[error("numeric divergence at step {step} ({detail})")]
    Diverged { step: u64, detail: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}
