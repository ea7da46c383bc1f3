use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] ccd_core::Error),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("no study in display slot {0}")]
    UnknownSlot(String),
    #[error("no {side} measurement in slot {slot}")]
    MeasurementUnavailable { slot: String, side: String },
    #[error("endpoint index must be 0 or 1, got {0}")]
    BadEndpoint(usize),
    #[error("no study is open")]
    NoStudyOpen,
    #[error("{0} folder is not configured")]
    FolderNotConfigured(&'static str),
    #[error("cannot read folder {path}: {reason}")]
    Folder { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
