use std::io;

use thiserror::Error;

use crate::conllu::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid treebank: {0}")]
    Treebank(String),

    #[error("alignment error in sentence {sent_id}: {message}")]
    Alignment { sent_id: String, message: String },

    #[error("embedding file error at byte {offset}: {message}")]
    EmbeddingFormat { offset: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("missing data for sentence {0}")]
    MissingSentence(String),

    #[error("missing attention tensors for sentence {0}")]
    MissingAttention(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
