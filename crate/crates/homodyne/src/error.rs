use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("order {requested} exceeds supported maximum {max}")]
    OrderOverflow { requested: usize, max: usize },

    #[error("dimension {dim} too small: {reason} (need at least {required})")]
    InsufficientDim {
        dim: usize,
        required: usize,
        reason: String,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("phase {0} outside [0, pi]")]
    PhaseOutOfRange(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("non-integrable configuration: gamma = {gamma} >= 1/4 requires a frequency cutoff")]
    NonIntegrable { gamma: f64 },

    #[error("rejection sampler for state '{state}' too inefficient: acceptance rate {rate:.3e} < 1e-3")]
    EnvelopeFailure { state: String, rate: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no root bracketed in [{lo}, {hi}] for {what}")]
    NoBracket { what: String, lo: f64, hi: f64 },

    #[error("internal consistency failure: {0}")]
    Inconsistent(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
