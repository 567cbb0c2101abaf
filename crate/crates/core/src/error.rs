use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Kernel matrix stayed indefinite through the whole jitter ladder.
    #[error("kernel matrix is not positive definite (jitter up to {max_jitter:e})")]
    Factorization { max_jitter: f64 },

    #[error("hyperparameter fit failed: {0}")]
    Fit(String),

    #[error("malformed tensor file: {0}")]
    TensorFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
