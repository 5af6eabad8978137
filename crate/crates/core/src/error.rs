//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The codebook search ran out of candidates before reaching the
    /// requested size. Carries the partial size that was reached.
    #[error("codebook construction failed: pool exhausted at {got} of {requested} words")]
    ConstructionFailure { requested: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("external channel error: {0}")]
    ExternalChannel(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("sample {index} clips: {value}")]
    Clipping { index: usize, value: f64 },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("desynchronized: {0}")]
    Desynchronized(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::ConstructionFailure { .. } => "construction-failure",
            Error::DegenerateSample(_) => "degenerate-sample",
            Error::ExternalChannel(_) => "external-channel-error",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::Clipping { .. } => "clipping",
            Error::MalformedFile(_) => "malformed-file",
            Error::Desynchronized(_) => "desynchronized",
            Error::Io(_) => "io",
        }
    }
}
