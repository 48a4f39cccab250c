//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid mode counts: {0}")]
    InvalidModes(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("spectral field is not conjugate-symmetric (|Im| = {max_im:e}), cannot produce a real field")]
    NotRealizable { max_im: f64 },

    #[error("non-finite value detected in {context} at t = {t}")]
    NonFinite { context: String, t: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint has bad magic header")]
    CheckpointBadMagic,

    #[error("checkpoint format version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint checksum mismatch (file corrupt or truncated)")]
    CheckpointChecksum,

    #[error("checkpoint truncated: {0}")]
    CheckpointTruncated(String),

    #[error("time series format error: {0}")]
    TimeSeries(String),

    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
