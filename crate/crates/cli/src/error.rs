use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("strict check failed: {0}")]
    Strict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Strict(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(format!("config error at {e}"))
    }
}

impl From<sigmalab_core::Error> for CliError {
    fn from(e: sigmalab_core::Error) -> Self {
        let msg = format!("error[{}]: {e}", e.code());
        if e.is_config_error() {
            CliError::Config(msg)
        } else {
            CliError::Numerical(msg)
        }
    }
}
