use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("all {total} walks were discarded during assembly ({time_invalid} time-invalid, {disconnected} disconnected, {out_of_range} out of range)")]
    AllWalksDiscarded {
        total: usize,
        time_invalid: usize,
        disconnected: usize,
        out_of_range: usize,
    },

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
