use thiserror::Error;

#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-positive intensity {value} at t={time} on node {node}")]
    NonPositiveIntensity { node: usize, time: f64, value: f64 },
    #[error("matrix I - A is singular or ill-conditioned (model is not stationary)")]
    Nonstationary,
    #[error("matrix is not positive definite; add a ridge term")]
    NotPositiveDefinite,
    #[error("simulation hit the cap of {cap} events before t={time}")]
    EventCap { cap: usize, time: f64 },
    #[error("dominating rate {bound} exceeded by intensity {value} at t={time}")]
    DominatingRateExceeded { bound: f64, value: f64, time: f64 },
    #[error("events out of order: t={next} follows t={prev}")]
    OutOfOrder { prev: f64, next: f64 },
    #[error("EM did not converge after {iterations} iterations (last improvement {last_improvement})")]
    EmNotConverged { iterations: usize, last_improvement: f64 },
    #[error("could not bracket threshold: {0}")]
    Bracket(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HawkesError>;
