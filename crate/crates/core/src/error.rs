use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by grid bookkeeping, metrics and resampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("grid dimensions must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("expected {expected} values for the grid, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("normalized map has value {value} outside [0, 1] at cell {index}")]
    OutOfUnitRange { index: usize, value: f64 },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("unit mismatch between maps")]
    UnitMismatch,
    #[error("cell {index} is outside a grid of {cells} cells")]
    OutOfRange { index: usize, cells: usize },
    #[error("cell {0} has already been measured")]
    DuplicateMeasurement(usize),
    #[error("unsupported upscale factor {0}; expected one of 1, 2, 4, 8, 16")]
    UnsupportedScale(usize),
    #[error("degenerate value range: min = max = {0}")]
    DegenerateRange(f64),
    #[error("operation requires {expected:?} units")]
    WrongUnit { expected: crate::grid::UnitTag },
    #[error("pair is missing its dBm normalization bounds")]
    MissingBounds,
}

/// Errors raised when reading or writing the on-disk formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Body { line: usize, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("model file: {0}")]
    Model(String),
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }
}
