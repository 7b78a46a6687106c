use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at row {row}, column {column}: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constant column `{0}` cannot be standardised")]
    ConstantColumn(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{solver} did not converge after {iterations} iterations")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
    },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("metal `{0}` missing from standards table")]
    MissingMetal(String),

    #[error("all grid candidates failed for {learner}: {causes:?}")]
    GridExhausted {
        learner: String,
        causes: Vec<String>,
    },

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("missing prerequisite artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact hash mismatch: {0}")]
    HashMismatch(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
            Error::Validation { .. } => "validation",
            Error::Empty(_) => "empty",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ConstantColumn(_) => "constant_column",
            Error::Degenerate(_) => "degenerate",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotConverged { .. } => "not_converged",
            Error::Singular(_) => "singular",
            Error::MissingMetal(_) => "missing_metal",
            Error::GridExhausted { .. } => "grid_exhausted",
            Error::Geometry(_) => "geometry",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::HashMismatch(_) => "hash_mismatch",
            Error::Parse { .. } => "parse",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
