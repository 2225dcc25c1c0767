use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: photo id {photo:?} appears in more than one triad")]
    DuplicatePhoto {
        path: PathBuf,
        line: usize,
        photo: String,
    },

    #[error("{0} contains no triads")]
    EmptyFile(PathBuf),

    #[error("feature file has bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("feature payload holds {actual} floats, header declares {count}x{dim}")]
    LengthMismatch { count: usize, dim: usize, actual: usize },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("photo index {photo} has no feature row ({rows} rows loaded)")]
    MissingFeatureRow { photo: usize, rows: usize },

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no eligible negative photo: {0}")]
    NoNegatives(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite score for candidate {candidate}")]
    NonFiniteScore { candidate: usize },

    #[error("non-finite training loss at epoch {epoch}, batch {batch} (mean loss so far {running_mean})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        running_mean: f64,
    },

    #[error("model artifact: {0}")]
    Artifact(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class name, stable across releases.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. }
            | Error::DuplicatePhoto { .. }
            | Error::EmptyFile(_)
            | Error::BadMagic(_)
            | Error::LengthMismatch { .. }
            | Error::NonFiniteFeature { .. } => "format",
            Error::MissingFeatureRow { .. } | Error::InvalidCorpus(_) | Error::InvalidSplit(_) => {
                "data"
            }
            Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => "config",
            Error::NoNegatives(_) => "sampling",
            Error::NonFiniteScore { .. } => "evaluation",
            Error::NonFiniteLoss { .. } => "training",
            Error::Artifact(_) => "artifact",
        }
    }
}
