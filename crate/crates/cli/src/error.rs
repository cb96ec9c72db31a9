use std::path::PathBuf;

use kinlv_core::fp::FpError;
use kinlv_core::mc::McError;
use kinlv_core::ode::OdeError;
use kinlv_core::ValidationErrors;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<ValidationErrors> for CliError {
    fn from(e: ValidationErrors) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::InvalidConfig(_) | OdeError::Unsupported(_) | OdeError::OutOfRange { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FpError> for CliError {
    fn from(e: FpError) -> Self {
        match e {
            FpError::Mesh(_) | FpError::Shape(_) | FpError::Invalid(_) => CliError::Validation(e.to_string()),
            FpError::Ode(inner) => inner.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::ResampleExhaustion { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
