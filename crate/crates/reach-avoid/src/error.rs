//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gradient requested at the nondifferentiable point q = attacker position")]
    DegeneratePoint,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver did not produce a usable point: {0}")]
    SolverFailure(String),

    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error("instance too large for the exact oracle: {0}")]
    InstanceTooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
