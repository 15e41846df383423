use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the VMT tensor container.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"VMT1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("ndim {0} outside 1..=4")]
    BadNdim(u8),
    #[error("zero extent on axis {axis}")]
    ZeroExtent { axis: usize },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("extent {0} does not fit in a u32")]
    ExtentOverflow(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("invalid tensor: {0}")]
    Tensor(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("entry {id:?} has no {field}")]
    MissingField { id: String, field: &'static str },

    #[error("entry {id:?} references missing path {path}")]
    DanglingPath { id: String, path: PathBuf },

    #[error("{id}: row {row} has zero norm")]
    ZeroNorm { id: String, row: usize },

    #[error("near-zero vector norm ({0:e})")]
    DegenerateVector(f64),

    #[error("frame count mismatch: {0} vs {1}")]
    FrameCountMismatch(usize, usize),

    #[error("window length k = {k} exceeds flow count of: {}", list_some(ids))]
    WindowTooLong { k: usize, ids: Vec<String> },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("step {step}: {message}")]
    Step { step: u32, message: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn list_some(ids: &[String]) -> String {
    const SHOWN: usize = 5;
    let head = ids[..ids.len().min(SHOWN)].join(", ");
    match ids.len().saturating_sub(SHOWN) {
        0 => head,
        more => format!("{head} and {more} more"),
    }
}

impl Error {
    /// True for errors caused by the caller's settings rather than by input data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::WindowTooLong { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
