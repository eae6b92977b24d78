use mfbo::Error as CoreError;
use thiserror::Error;

/// Failures of one CLI command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("evaluation failure: {0}")]
    Evaluation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Evaluation(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::UnsupportedDimension { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::UnknownObjective(_) => Self::Config(msg),
            CoreError::Evaluation(_) => Self::Evaluation(msg),
            CoreError::DegenerateObjective
            | CoreError::IllConditioned { .. }
            | CoreError::FitFailed(_)
            | CoreError::InsufficientData(_)
            | CoreError::EmptyHistory => Self::Numerical(msg),
            CoreError::Io(_) | CoreError::Csv(_) | CoreError::Json(_) => Self::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
