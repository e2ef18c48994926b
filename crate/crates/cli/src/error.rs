use thiserror::Error;

use crate::formats::FormatError;

/// Process exit code for usage, configuration and I/O failures.
pub const EXIT_USAGE: u8 = 2;
/// Process exit code for internal invariant violations.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] scusum_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Format(_) => EXIT_USAGE,
            CliError::Core(scusum_core::Error::Invariant(_)) | CliError::Internal(_) => {
                EXIT_INTERNAL
            }
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
