use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {requested} exceeds the supported Sobol' dimension {max}")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective has zero variance; sensitivity indices are undefined")]
    DegenerateObjective,

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("all {0} hyperparameter starts failed to factorize")]
    FitFailed(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("evaluation failed: {0}")]
    Evaluation(#[from] crate::objectives::EvalError),

    #[error("empty history")]
    EmptyHistory,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
