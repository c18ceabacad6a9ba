//! Error type shared across the engine.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by dataset validation, configuration, metrics, and the
/// file pipeline. Programmer contract violations (wrong lengths, values a
/// caller promised to range-check) panic instead; see the individual
/// operation docs.
#[derive(Debug, Error)]
pub enum Error {
    /// An input record is missing a field or a field has the wrong type.
    #[error("schema error: {0}")]
    Schema(String),

    /// A numeric field is outside its documented range.
    #[error("range error: {0}")]
    Range(String),

    /// A configuration value violates an invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A record file does not match the expected N x G grid.
    #[error("shape error: {0}")]
    Shape(String),

    /// Correlation is undefined for the given inputs.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// An evaluation or report cannot be produced at all.
    #[error("degenerate report: {0}")]
    Degenerate(String),

    /// Reading or writing a pipeline file failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 0 success, 1 validation, 2 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
