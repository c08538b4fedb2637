use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range for slot `{slot}` (vocab size {vocab_size})")]
    VocabBounds {
        slot: String,
        index: usize,
        vocab_size: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("training diverged in {phase} at epoch {epoch}, batch {batch}")]
    Divergence {
        phase: String,
        epoch: usize,
        batch: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("dimension mismatch in `{component}`: expected {expected}, found {found}")]
    DimMismatch {
        component: String,
        expected: String,
        found: String,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate paired t-test: all differences are zero")]
    DegenerateTest,

    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Divergence { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
