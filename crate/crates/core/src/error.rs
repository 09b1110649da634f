use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("quadrature did not converge after {evaluations} evaluations (partial value {partial}, error estimate {error_estimate})")]
    Quadrature { partial: f64, error_estimate: f64, evaluations: usize },

    #[error("table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Overflow(_) => "overflow",
            Error::Resource(_) => "resource",
            Error::Quadrature { .. } => "quadrature",
            Error::Cache(_) => "cache",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
