use thiserror::Error;

/// Errors reported by the estimators, samplers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("bracket expansion failed after {doublings} doublings")]
    BracketExpansion { doublings: usize },

    #[error("weights need common denominator {required} which exceeds the cap {cap}")]
    Rationalization { required: u64, cap: u64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize, trace: Vec<f64> },

    #[error("invalid model record: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for [`Error::InvalidParameter`].
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
