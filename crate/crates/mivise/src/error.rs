//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("fully masked row {row}: softmax has no unmasked entries")]
    DegenerateRow { row: usize },

    #[error("degenerate vector in {what}: norm {norm:.3e} is below {eps:.1e}")]
    DegenerateVector { what: String, norm: f64, eps: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: String, expected: String },

    #[error("truncated file {path} at item {item}")]
    Truncated { path: String, item: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("empty or all-out-of-vocabulary sentence: {0:?}")]
    EmptySentence(String),

    #[error("training diverged at epoch {epoch}: objective is {value}")]
    Diverged { epoch: usize, value: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
