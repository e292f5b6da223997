use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty body: no data rows after the header")]
    EmptyBody,

    #[error("bad header: {0}")]
    Header(String),

    #[error("row {row}, column {column:?}: {reason}")]
    Cell {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("schema mismatch: missing {missing:?}, extra {extra:?}")]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("feature vector has {got} values, expected {expected}")]
    Length { expected: usize, got: usize },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("group {group:?}: schema lacks members {missing:?}")]
    GroupMissing { group: String, missing: Vec<String> },

    #[error("unknown feature group {0:?}")]
    UnknownGroup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("total training weight is zero")]
    ZeroWeight,

    #[error("non-finite loss at epoch {epoch}, record {record}")]
    Diverged { epoch: usize, record: usize },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
