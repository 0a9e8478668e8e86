use std::fmt;

use kernel_sdr::Error as CoreError;
use thiserror::Error;

/// Failure of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file entries or option values.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unusable input data, or output that could
    /// not be written.
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// Single-line record for scripts: `ksdr-error code=N kind=K message=...`.
    pub fn machine_line(&self) -> MachineLine<'_> {
        MachineLine(self)
    }
}

pub struct MachineLine<'a>(&'a CliError);

impl fmt::Display for MachineLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.0.to_string().replace(['\n', '\r'], " ");
        write!(
            f,
            "ksdr-error code={} kind={} message={msg:?}",
            self.0.exit_code(),
            self.0.kind()
        )
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) => CliError::Usage(e.to_string()),
            CoreError::DimensionMismatch { .. } | CoreError::Degenerate(_) => {
                CliError::Data(e.to_string())
            }
            CoreError::Numeric(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
