pub mod coeffs;
pub mod schedule;
pub mod simulate;
pub mod verify;

use crate::config::ConfigError;
use execrisk::closed_form::ClosedFormError;
use execrisk::dynamics::SimError;
use execrisk::hjb::HjbError;
use execrisk::risk::RiskError;
use thiserror::Error;

/// Top-level command failure, mapped onto process exit codes by main.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    /// Exit code 1.
    #[error("verification failed: {0}")]
    Verification(String),
    /// Exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 1,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

impl From<ClosedFormError> for CliError {
    fn from(e: ClosedFormError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<HjbError> for CliError {
    fn from(e: HjbError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
