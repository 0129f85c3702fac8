use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between loading a scenario and writing
/// artifacts. The CLI maps each variant onto a stable exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("invalid value at `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("pair map is not one-to-one: {0}")]
    NonBijectivePairs(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("no channel: {0}")]
    NoChannel(String),

    #[error(
        "singular recording at element (m={m}, n={n}) located at y={y:.6} m, z={z:.6} m: \
         reference wave amplitude is zero"
    )]
    SingularRecording { m: usize, n: usize, y: f64, z: f64 },

    #[error("ambiguous peak: {0}")]
    AmbiguousPeak(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("too few bits per SNR point: got {got}, at least {required} required")]
    InsufficientBits { got: usize, required: usize },

    #[error("output self-check failed for {path}: {reason}")]
    OutputCheck { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 for unparseable input, 3 for invariant
    /// violations, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 2,
            Error::InvalidInput { .. }
            | Error::NonBijectivePairs(_)
            | Error::InsufficientBits { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptyInput(_) => 3,
            Error::DegenerateGeometry(_)
            | Error::NoChannel(_)
            | Error::SingularRecording { .. }
            | Error::AmbiguousPeak(_)
            | Error::OutputCheck { .. } => 4,
        }
    }
}
