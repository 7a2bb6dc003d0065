use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("grid mismatch: expected {expected}, got {actual}")]
    GridMismatch { expected: String, actual: String },

    #[error("unmapped source label id {0}")]
    UnmappedLabel(u16),

    #[error("way {way} references missing node {node}")]
    MissingNode { way: i64, node: i64 },

    #[error("IMU coverage gap of {gap:.3} s near t = {at:.3} s")]
    ImuGap { gap: f64, at: f64 },

    #[error("ground-truth path is {available:.2} m long, at least {required:.2} m required")]
    TrajectoryTooShort { required: f64, available: f64 },

    #[error("trajectories share no timestamps within {tolerance} s")]
    NoOverlap { tolerance: f64 },

    #[error("frame {frame}: {reason}")]
    Frame { frame: String, reason: String },

    #[error("malformed {kind} file {path}: {reason}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("osm: {0}")]
    Xml(#[from] roxmltree::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
