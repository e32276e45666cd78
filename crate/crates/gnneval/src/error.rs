//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: anything that
//! stems from bad inputs or configuration exits with 2, numeric failures
//! (divergence, non-finite values) exit with 3.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed file content (graph, split, checkpoint, config, ...).
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Structural violation independent of any file (bad shapes, invalid
    /// split ids, mismatched bindings, out-of-range parameters).
    #[error("{0}")]
    Invalid(String),

    /// Training or inference produced a non-finite value, or an iterative
    /// routine failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
