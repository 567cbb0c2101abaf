use std::path::Path;

use thiserror::Error;

/// CLI failures, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files.
    #[error("{0}")]
    Config(String),

    /// Failure while computing or writing results.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }

    pub(crate) fn read(path: &Path, err: std::io::Error) -> Self {
        CliError::Config(format!("cannot read {}: {err}", path.display()))
    }
}

impl From<cco_core::Error> for CliError {
    fn from(err: cco_core::Error) -> Self {
        use cco_core::Error as E;
        match err {
            E::InvalidLayout(_) | E::InvalidGrid(_) | E::InvalidConfiguration(_) | E::InvalidArgument(_) => {
                CliError::Config(err.to_string())
            }
            E::Factorization { .. } | E::Fit(_) | E::TensorFormat(_) | E::Io(_) => CliError::Runtime(err.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
