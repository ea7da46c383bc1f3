use std::path::PathBuf;

use thiserror::Error;

use crate::heatmap::ChannelName;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("PNG error on {path}: {reason}")]
    Png { path: PathBuf, reason: String },
    #[error("unknown channel name {0:?}")]
    UnknownChannel(String),
    #[error("duplicate channel {0}")]
    DuplicateChannel(ChannelName),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("invalid raster size {width}x{height}")]
    InvalidSize { width: usize, height: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need at least 2 distinct points, found {distinct}")]
    TooFewPoints { distinct: usize },
    #[error("line fit failed: best consensus had {best} inliers, {required} required")]
    FitFailed { best: usize, required: usize },
    #[error("invalid RANSAC configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("endpoints coincide at ({0}, {1})")]
    CoincidentEndpoints(f64, f64),
    #[error("heatmap has no channel {0}")]
    MissingChannel(ChannelName),
    #[error("channel {channel}: {source}")]
    Channel {
        channel: ChannelName,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("segment endpoints coincide or lie outside the raster")]
    DegenerateSegment,
    #[error("no ground truth for {0}")]
    MissingTruth(String),
    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_channel(self, channel: ChannelName) -> Self {
        Error::Channel {
            channel,
            source: Box::new(self),
        }
    }
}
