use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate 6D input")]
    Degenerate6D,

    #[error("matrix is not a rotation (orthonormality error {ortho:.3e}, det {det:.6})")]
    NotARotation { ortho: f64, det: f64 },

    #[error("rotation sequence is empty")]
    EmptySequence,

    #[error("no frames")]
    NoFrames,

    #[error("length mismatch for {field}: expected {expected}, got {actual}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("window [{start}, {end}) out of range for sequence of {len} frames")]
    WindowOutOfRange { start: usize, end: usize, len: usize },

    #[error("sensor index {index} out of range for {sensors} sensors")]
    SensorOutOfRange { index: usize, sensors: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("out-of-order frame: t={got} after t={last}")]
    OutOfOrder { last: u64, got: u64 },

    #[error("estimator requires a ground-truth reference window")]
    MissingReference,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated {what}")]
    Truncated { what: String },

    #[error("non-finite value (NaN or Inf) in {0}")]
    NonFinite(String),

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("tensor {name:?} has shape {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn truncated(what: impl Into<String>) -> Self {
        Error::Truncated { what: what.into() }
    }

    /// Converts a not-found I/O error on `path` into [`Error::MissingFile`].
    pub(crate) fn from_open(err: std::io::Error, path: &std::path::Path) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io(err)
        }
    }
}
