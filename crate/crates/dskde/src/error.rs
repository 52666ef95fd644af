use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame stack is empty")]
    EmptyStack,

    #[error("pixel value {value} at frame {frame}, pixel ({row}, {col}) is outside [0, 1]")]
    ValueOutOfRange {
        frame: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("pixel ({row}, {col}) outside the {p}x{q} lattice")]
    PixelOutOfBounds {
        row: usize,
        col: usize,
        p: usize,
        q: usize,
    },

    #[error("bandwidth {name} = {value} is outside its valid range")]
    InvalidBandwidth { name: &'static str, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
