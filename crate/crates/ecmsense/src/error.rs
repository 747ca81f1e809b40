use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ecmsense_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row could not be read or violates an ordering rule. `line` is 1-based
    /// and counts the header.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("identification did not converge for interval(s) {0}")]
    Convergence(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for convergence failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Convergence(_) => 2,
            _ => 1,
        }
    }
}
