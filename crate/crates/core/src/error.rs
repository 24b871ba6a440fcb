//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("token id {0} out of range (vocab size {1})")]
    TokenOutOfRange(u32, usize),

    #[error("horizon mismatch: expected {expected}, got {got}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error("config hash mismatch: checkpoint {ckpt}, requested {requested}")]
    ConfigHashMismatch { ckpt: String, requested: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("loss weight alpha={0} > 0 but batch contains no flow sample")]
    NoFlowSample(f64),

    #[error("non-finite action at integration step {0}")]
    NonFiniteFlowStep(usize),

    #[error("unknown task: {0}")]
    UnknownTask(String),

    #[error("unknown word: {0:?}")]
    UnknownWord(String),

    #[error("scene cannot support task {task}: {reason}")]
    SceneUnsupported { task: String, reason: String },

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("{0}")]
    Other(String),
}
