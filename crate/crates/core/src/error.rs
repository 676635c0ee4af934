use thiserror::Error;

/// Errors produced by code construction, decoding and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("layers are linearly dependent: rank {rank} < {expected}")]
    DependentLayers { rank: usize, expected: usize },

    #[error("search space too large: {hypotheses} hypotheses (limit {limit})")]
    SearchTooLarge { hypotheses: f64, limit: f64 },

    #[error("invalid configuration field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
