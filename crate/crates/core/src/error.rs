use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RllError>;

#[derive(Debug, Error)]
pub enum RllError {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("inconsistent feature_dim: example {id} has {found}, expected {expected}")]
    InconsistentFeatureDim {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("inconsistent worker_count: example {id} has {found}, expected {expected}")]
    InconsistentWorkerCount {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("label {value} outside {{0,1}} in example {id}")]
    InvalidLabel { id: String, value: i64 },

    #[error("missing expert label for example {0}")]
    MissingExpertLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate embedding (zero norm)")]
    DegenerateEmbedding,

    #[error("need two positives, found {0}")]
    NotEnoughPositives(usize),

    #[error("not enough negatives for k={k}: found {available}")]
    NotEnoughNegatives { k: usize, available: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("degenerate fold {fold}: {reason}")]
    DegenerateFold { fold: usize, reason: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
