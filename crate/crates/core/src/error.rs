use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported quadrature degree {requested}; supported: {min}..={max}")]
    UnsupportedDegree {
        requested: usize,
        min: usize,
        max: usize,
    },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scene constraint `{constraint}` unsatisfiable after {attempts} attempts")]
    Unsatisfiable {
        constraint: &'static str,
        attempts: usize,
    },

    #[error("image source at {distance:.2e} m from a receiver (minimum is 1 mm)")]
    ColocatedSource { distance: f64 },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("signal too short: need {needed} samples, got {actual}")]
    SignalTooShort { needed: usize, actual: usize },

    #[error("empty signal")]
    EmptySignal,

    #[error("window/hop combination does not overlap-add to a nonzero envelope (fft_size {fft_size}, hop {hop})")]
    NotOverlapAddable { fft_size: usize, hop: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
