use dragon_core::DragonError;
use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 configuration, 3 numeric divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<DragonError> for CliError {
    fn from(e: DragonError) -> Self {
        match e {
            DragonError::Diverged { .. } | DragonError::Numeric(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}
