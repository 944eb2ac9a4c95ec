use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),
    #[error("invalid loss table: {0}")]
    InvalidLoss(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("loss sequence is empty")]
    EmptyLossSequence,
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
