use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Numeric(#[from] ttnprep_core::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 config or input problem, 3 numerical failure, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) | CliError::Format(_) => 2,
            CliError::Numeric(ttnprep_core::Error::Parameter(_)) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
