use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} = {value} is outside [{min}, {max}]")]
    Range {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("rotation cannot be encoded with bounded Euler angles: {0}")]
    Encoding(String),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("assignment has no matched pairs")]
    EmptyAssignment,

    #[error("value outside the loss domain: {0}")]
    Domain(String),

    #[error("ground-truth set is empty")]
    EmptyGroundTruth,

    #[error("prediction set is empty")]
    EmptyPrediction,

    #[error("target list is empty")]
    EmptyTargets,

    #[error("answer does not match template at anchor {anchor:?} (byte {offset})")]
    Parse { anchor: String, offset: usize },

    #[error("descriptor {value:?} is not in the library for slot {slot}")]
    UnknownDescriptor { slot: String, value: String },

    #[error("pruned set contains pose #{0} which is absent from the original set")]
    Subset(usize),

    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("candidate selection by confidence needs confidences")]
    MissingConfidence,

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

    pub(crate) fn format(path: impl Into<PathBuf>, offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }
}
