use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("feature file for `{image_id}` not found: {path}")]
    MissingFeature { image_id: String, path: PathBuf },

    #[error("image `{0}` has no saliency map")]
    MissingSaliency(String),

    #[error("query item `{0}` has no bounding box")]
    MissingBbox(String),

    #[error("bounding box {bbox:?} outside {rows}x{cols} grid")]
    InvalidBbox { bbox: [usize; 4], rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no training data")]
    NoTrainingData,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
