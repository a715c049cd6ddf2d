use std::path::PathBuf;

/// Error type shared by the whole pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content, located by 1-based row and column.
    #[error("format error in {path} (row {row}, column {col}): {msg}")]
    Format {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite or otherwise unusable numeric data.
    #[error("data error: {0}")]
    Data(String),

    /// A domain invariant failed (asymmetry, out-of-range weights, duplicate ids, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Iterative numerics failed to converge or a linear system was singular.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Reservoir state exceeded the divergence guard at the given 1-based timestep.
    #[error("reservoir state diverged at timestep {timestep}")]
    Divergence { timestep: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Failure while processing one subject.
    #[error("subject {id}: {source}")]
    Subject {
        id: String,
        #[source]
        source: Box<Error>,
    },

    /// Failure inside one cross-validation fold.
    #[error("fold {index} failed: {source}")]
    Fold {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
