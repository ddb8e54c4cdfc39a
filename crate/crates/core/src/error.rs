use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("truncated file: expected {expected} bytes of {what}, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("header/payload mismatch: {0}")]
    PayloadMismatch(String),

    #[error(
        "modal series not converged at ka = {ka}: last of {n_terms} terms has magnitude {last_term:e}"
    )]
    SeriesNotConverged {
        ka: f64,
        n_terms: usize,
        last_term: f64,
    },

    #[error("no signal energy")]
    NoSignalEnergy,

    #[error("no excitation: source auto-spectrum is zero at every bin")]
    NoExcitation,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Whether the error originates from reading, writing, or decoding a file.
    pub fn is_file_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Version { .. }
                | Error::Truncated { .. }
                | Error::PayloadMismatch(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Wav(_)
        )
    }
}
