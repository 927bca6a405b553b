use thiserror::Error;

/// Errors produced by the surrogate, learning and benchmark routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An objective evaluation failed at the given fidelity level (1-based).
    #[error("evaluation failed at level {level}: {message}")]
    Evaluation { level: usize, message: String },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
