use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fuzzy density {value} at criterion {index}: {reason}")]
    InvalidDensity {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("no admissible lambda: {0}")]
    NoAdmissibleLambda(String),

    #[error("criterion index {index} out of range for {len} criteria")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("criterion index {0} appears more than once in subset")]
    DuplicateIndex(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective returned non-finite fitness {value} at {point:?}")]
    NonFiniteFitness { value: f64, point: Vec<f64> },

    #[error("{}: file not found", path.display())]
    FileNotFound { path: PathBuf },

    #[error("{}: row {row} has {found} columns, expected {expected}", path.display())]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}: row {row}, column {column}: cannot parse {cell:?} as a finite number", path.display())]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("{}: contains no data rows", path.display())]
    EmptyMatrix { path: PathBuf },

    #[error("{}: head file needs at least 2 rows (weights + bias), found {rows}", path.display())]
    TooFewRows { path: PathBuf, rows: usize },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
