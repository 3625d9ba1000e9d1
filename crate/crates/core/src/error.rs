use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} ({op}): {msg}")]
    Graph { node: usize, op: &'static str, msg: String },

    #[error("node {node} ({op}): non-finite output")]
    NonFinite { node: usize, op: &'static str },

    #[error("loss node {node} is not scalar (shape {shape:?})")]
    NonScalarLoss { node: usize, shape: Vec<usize> },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: i64, classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient for parameter group `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss `{name}` at step {step}")]
    NonFiniteLoss { name: &'static str, step: u64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("checkpoint field `{field}`: {msg}")]
    Checkpoint { field: String, msg: String },

    #[error("checkpoint version `{found}` is not supported (expected `{expected}`)")]
    Version { found: String, expected: &'static str },

    #[error("oracle classifier accuracy {accuracy:.4} is below the required {required:.4}")]
    OracleAccuracy { accuracy: f64, required: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
