use thiserror::Error;

/// Errors raised by the signal-processing and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("buffer too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("degenerate LFSR state (all zeros)")]
    DegenerateLfsr,

    #[error("zero-power signal: {0}")]
    ZeroPower(String),

    #[error("unsupported resampling ratio {from} -> {to}")]
    UnsupportedRatio { from: f64, to: f64 },

    #[error("invalid MCS index {0}")]
    InvalidMcs(u8),

    #[error("PSDU of {0} octets exceeds the 4095-octet limit")]
    OversizePsdu(usize),

    #[error("channel estimate is singular at bin {bin} (|H| = {magnitude:e})")]
    SingularChannel { bin: usize, magnitude: f64 },

    #[error("covert frame of {frame} samples does not fit in {available} samples at offset {offset}")]
    FrameTooLong {
        frame: usize,
        offset: usize,
        available: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
