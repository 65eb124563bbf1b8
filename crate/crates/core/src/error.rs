use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigen-decomposition did not converge")]
    EigenFailure,

    #[error("covariance spectrum outside [{lower}, {upper}]: found {found}")]
    SpectrumOutOfBounds { lower: f64, upper: f64, found: f64 },

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(&'static str),

    #[error("cone projection failed: {0}")]
    ProjectionFailure(String),

    #[error("cone is trivial (K = {{0}}); {0} is undefined")]
    TrivialCone(&'static str),

    #[error("restricted eigenvalue constant must be positive, got {0}")]
    NonPositiveRe(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
