use std::path::PathBuf;

use crate::gazetteer::EntityKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{kind} pool exhausted: {distinct} distinct names but only {pool} candidates")]
    PoolExhausted { kind: EntityKind, distinct: usize, pool: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("AUC needs both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("remote request failed after {attempts} attempt(s) for inputs {indices:?}: {message}")]
    Remote { indices: Vec<usize>, attempts: u32, message: String },

    #[error("empty response from {0}")]
    EmptyResponse(String),

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no usable samples ({skipped} skipped)")]
    AllSkipped { skipped: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn for_sample(self, sample_id: &str) -> Self {
        Error::Sample { sample_id: sample_id.to_string(), source: Box::new(self) }
    }
}
