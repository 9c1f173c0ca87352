use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: Jacobian condition {condition:.3e}, null direction {direction}")]
    DegenerateGeometry { condition: f64, direction: String },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("invalid landmark at row {row}: {reason}")]
    InvalidLandmark { row: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("validation failed at {location}: {reason}")]
    Validation { location: String, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
