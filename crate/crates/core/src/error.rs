use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("beta {beta} leaves {n_known} known classes out of {n_classes} (need at least 2)")]
    InfeasibleBeta {
        beta: f64,
        n_classes: usize,
        n_known: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate warm-up: {0}")]
    DegenerateWarmup(String),

    #[error("label {0} is not registered in the classifier")]
    UnregisteredLabel(String),

    #[error("label {0} is already registered in the classifier")]
    DuplicateLabel(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
