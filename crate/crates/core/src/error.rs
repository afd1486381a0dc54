use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the smoothing library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a physical relation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Cp regression could not be solved (rank deficient design).
    #[error("Cp fit failed: {0}")]
    Fit(String),

    /// Invalid parameters or scenario configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A trace file did not follow the expected CSV layout.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the filesystem rather than from
    /// the content of an input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
