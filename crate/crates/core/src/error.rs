use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid domain.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The input data violates a contract (NaN, constant channel, empty class, ...).
    #[error("data error: {0}")]
    Data(String),
    /// A numerical routine failed (non-convergence, loss of definiteness, divergence).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A file did not match its declared binary or text format.
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Prefix the message with a stage label, keeping the variant.
    pub fn context(self, label: &str) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{label}: {m}")),
            Error::Data(m) => Error::Data(format!("{label}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{label}: {m}")),
            Error::Format(m) => Error::Format(format!("{label}: {m}")),
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{label}: {e}"))),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
