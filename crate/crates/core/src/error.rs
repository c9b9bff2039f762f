use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value produced by layer `{layer}`")]
    NonFinite { layer: String },

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("ambiguity value {0} is not one of the presented stimulus levels")]
    UnknownAmbiguity(f64),

    #[error("invalid filter design: {0}")]
    Filter(String),

    #[error("sequence of length {len} is too short, need more than {min} samples")]
    TooShort { len: usize, min: usize },

    #[error("{path}: expected {expected} channel rows, found {found}")]
    ChannelCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: non-numeric cell {cell:?} at row {row}, column {col}")]
    BadCell {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },

    #[error("{path}: ragged rows, row {row} has {found} columns but row 1 has {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid training setup: {0}")]
    Training(String),

    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint model config does not match: {0}")]
    ConfigMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
