use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} rejected: need a power of two, at least 8")]
    InvalidGrid(usize),

    #[error("non-finite sample at grid point ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("fields live on different grids ({0} vs {1} modes per dimension)")]
    GridMismatch(usize, usize),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cutoff level {level} is not resolved by a {modes}-mode grid")]
    LevelTooHigh { level: u32, modes: usize },

    #[error("renormalisation sum tail {tail:e} exceeds tolerance {tolerance:e}")]
    TruncationTail { tail: f64, tolerance: f64 },

    #[error("Wick exponent {exponent:.1} exceeds the overflow guard")]
    Overflow { exponent: f64 },

    #[error("forcing has negative value {min:e} below tolerance")]
    NegativeForcing { min: f64 },

    #[error("step {step}: dt * Lipschitz bound = {product:.3} exceeds stability limit")]
    StepStability { step: usize, product: f64 },

    #[error("initial datum too rough: {fraction:.3} of its H^{s} energy sits in the top shell")]
    RoughInitialDatum { s: f64, fraction: f64 },

    #[error("time points must be strictly increasing and start at 0")]
    InvalidTimes,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("effective sample size {ess:.1} below threshold {threshold}")]
    LowEss { ess: f64, threshold: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("dump format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
