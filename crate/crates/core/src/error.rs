use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the curation, training and diagnostics stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown stance label {0:?}")]
    UnknownLabel(String),

    #[error("invalid document {id}: {reason}")]
    InvalidDocument { id: String, reason: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("zero vector encountered{}", .0.as_deref().map(|id| format!(" (row {id})")).unwrap_or_default())]
    ZeroVector(Option<String>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("missing embedding for ids {0:?}")]
    MissingEmbedding(Vec<String>),

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
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

    /// True for failures caused by non-finite values or degenerate numerics
    /// rather than by malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::ZeroVector(_))
    }
}
