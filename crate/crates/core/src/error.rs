use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A mirror-map inverse left the representable range.
    #[error("mirror map saturated at coordinate {index} (dual value {value})")]
    Saturation { index: usize, value: f64 },

    #[error("tape sequencing error: expected t = {expected}, got {got}")]
    Sequencing { expected: f64, got: f64 },

    #[error("solver failure: {reason} (residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("singular configuration: pairwise distance {distance:e} below floor {floor:e}")]
    Singularity { distance: f64, floor: f64 },

    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by a malformed configuration or argument.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::Unsupported(_)
                | Error::Json(_)
        )
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}
