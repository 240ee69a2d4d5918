use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the picking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed MRC header: {0}")]
    MalformedHeader(String),

    #[error("unsupported MRC mode {0} (supported: 0, 1, 2, 6)")]
    UnsupportedMode(i32),

    #[error("MRC file holds {0} sections; stack not supported; extract a section")]
    StackNotSupported(usize),

    #[error("non-finite intensity at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("window at ({row}, {col}) of side {side} exceeds image bounds {height}x{width}")]
    OutOfBounds {
        row: usize,
        col: usize,
        side: usize,
        height: usize,
        width: usize,
    },

    #[error("image {height}x{width} is smaller than {what} ({size})")]
    TooSmall {
        height: usize,
        width: usize,
        what: &'static str,
        size: usize,
    },

    #[error("{0} class empty")]
    EmptyClass(ClassKind),

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("cannot place {requested} particles without overlap (placed {placed})")]
    Placement { requested: usize, placed: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

/// Which training class was deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Particle,
    Noise,
}

impl std::fmt::Display for ClassKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassKind::Particle => f.write_str("particle"),
            ClassKind::Noise => f.write_str("noise"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
