use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("unreadable input: {0}")]
    Unreadable(String),

    /// A stock's timestamps went backwards; the feed is treated as corrupted.
    #[error("out-of-order timestamp for stock {stock} at line {line}")]
    OutOfOrder { stock: String, line: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no events in group {0}")]
    EmptyGroup(String),

    #[error("curve {0} has no valid points")]
    AllMasked(String),

    #[error("power-law fit refused: {0}")]
    FitRefused(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("manifest rejected: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
