use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("spectrum is not conjugate-symmetric: imaginary residue {residue:e} exceeds {limit:e}")]
    SymmetryViolation { residue: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate embedding from `{model_id}`: zero vector")]
    DegenerateEmbedding { model_id: String },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    EmbeddingDimension { left: usize, right: usize },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("ordering unavailable: profile is degenerate")]
    OrderingUnavailable,

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
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
}
