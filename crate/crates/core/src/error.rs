use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its documented invariants.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid fault scenario: {0}")]
    Scenario(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    /// A mathematical precondition failed (negative variance, non-normalized
    /// probabilities, too-short sequences, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("training error: {0}")]
    Training(String),

    /// A class needed by a pipeline stage is absent from the training corpus.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// Artifacts that cannot be used together (feature spec mismatch, wrong
    /// bundle mode, unsupported format version).
    #[error("compatibility error: {0}")]
    Compatibility(String),

    /// Input file does not follow the frozen record schema.
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("label error: {0}")]
    Label(String),

    #[error("window error: record has {len} samples, window needs {window}")]
    Window { len: usize, window: usize },

    #[error("pipeline configuration error: {0}")]
    Pipeline(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
