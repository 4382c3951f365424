use thiserror::Error;

/// Errors raised by the selection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EasError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degrees of freedom must be positive, got {0}")]
    DegreesOfFreedom(i64),

    #[error("every model has zero mass")]
    AllInadmissible,

    #[error("exhaustive search is capped at p = {cap}, got p = {p}")]
    CapExceeded { p: usize, cap: usize },

    #[error("no admissible initial model found: {0}")]
    InitializationFailed(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EasError>;

impl From<std::io::Error> for EasError {
    fn from(e: std::io::Error) -> Self {
        EasError::Io(e.to_string())
    }
}
