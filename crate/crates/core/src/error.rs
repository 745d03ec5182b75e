use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Malformed input. `at` names the offending field and record index.
    #[error("parse error at {at}: {msg}")]
    Parse { at: String, msg: String },

    /// Well-formed input that breaks a data-model invariant.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("no foreground points")]
    NoForeground,

    #[error("no decided points")]
    NoDecided,

    #[error("missing segment ids: {0}")]
    MissingSegments(String),

    #[error("placement failed: {0}")]
    PlacementFailed(String),

    #[error("clustering is not a partition: {0}")]
    NotPartition(String),

    #[error("mask iou of two empty sets")]
    EmptyMasks,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of input data (as opposed to
    /// invalid parameters).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Schema(_)
                | Error::Io { .. }
                | Error::MissingSegments(_)
                | Error::NotPartition(_)
                | Error::InvalidBox(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
