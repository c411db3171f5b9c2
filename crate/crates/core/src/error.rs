use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the distance pipeline.
#[derive(Debug, Error)]
pub enum NptError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("ingestion error at row {row}, column '{column}': {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("degenerate scale: pooled standard deviation of dimension {dimension} is zero")]
    DegenerateScale { dimension: usize },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("size guard exceeded: {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("sinkhorn became unstable at iteration {iteration} (epsilon = {epsilon})")]
    Instability { iteration: usize, epsilon: f64 },

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("pair ({left}, {right}) failed: {source}")]
    Pair {
        left: String,
        right: String,
        #[source]
        source: Box<NptError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl NptError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            NptError::Validation(_)
            | NptError::Ingestion { .. }
            | NptError::DegenerateScale { .. }
            | NptError::Unsupported(_)
            | NptError::SizeGuard { .. } => ErrorKind::Validation,
            NptError::Numerical(_)
            | NptError::Instability { .. }
            | NptError::DegenerateEmbedding(_) => ErrorKind::Numerical,
            NptError::Pair { source, .. } => source.kind(),
            NptError::Io { .. } | NptError::Json(_) => ErrorKind::Io,
            NptError::Csv(e) => {
                if e.is_io_error() {
                    ErrorKind::Io
                } else {
                    ErrorKind::Validation
                }
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NptError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn validation(msg: impl Into<String>) -> NptError {
    NptError::Validation(msg.into())
}

pub type Result<T> = std::result::Result<T, NptError>;
