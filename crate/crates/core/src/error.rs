use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stream integrity: non-finite sample at index {index}")]
    StreamIntegrity { index: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("circular mean undefined (resultant length {resultant:.3e})")]
    UndefinedMean { resultant: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("timer resolution {resolution_ns} ns is coarser than 1 us; raise the batch size")]
    TimerResolution { resolution_ns: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl Error {
    /// Stable short name for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::StreamIntegrity { .. } => "stream_integrity",
            Error::Config(_) => "config",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::UndefinedMean { .. } => "undefined_mean",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Parse { .. } => "parse",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::TimerResolution { .. } => "timer_resolution",
            Error::Io(_) => "io",
        }
    }
}
