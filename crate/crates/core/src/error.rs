use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("inconsistent grid sizes: image {index} is {rows}x{cols}, expected {exp_rows}x{exp_cols}")]
    InconsistentGrid {
        index: usize,
        rows: usize,
        cols: usize,
        exp_rows: usize,
        exp_cols: usize,
    },
    #[error("series has {0} images; at least 2 are required")]
    TooFewImages(usize),
    #[error("non-positive value {value} + offset at image {m}, pixel ({i}, {j})")]
    NonPositive { m: usize, i: usize, j: usize, value: f64 },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("covariance matrix is numerically singular: {0}")]
    Singular(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
