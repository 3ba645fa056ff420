//! Error type shared across the engine.

use thiserror::Error;

/// All failure modes surfaced by the core engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("numeric error at {path}: {detail}")]
    Numeric { path: String, detail: String },
    #[error("mode error: {0}")]
    Mode(String),
    #[error("batch error: {0}")]
    Batch(String),
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),
    #[error("degenerate vector: {0}")]
    DegenerateVector(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
