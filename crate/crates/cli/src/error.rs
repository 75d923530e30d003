use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI run, each mapped to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed scenario, invalid problem setup.
    #[error("{0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    /// A numeric failure after setup succeeded.
    #[error(transparent)]
    Numeric(lieflow::Error),

    #[error("cannot write artifacts: {0}")]
    Write(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Numeric(_) | CliError::Write(_) => 1,
        }
    }

    /// Setup-time error from the core library.
    pub fn setup(e: lieflow::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Run-time error from the core library.
    pub fn numeric(e: lieflow::Error) -> Self {
        match e {
            lieflow::Error::Io(io) => CliError::Write(io),
            e => CliError::Numeric(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
