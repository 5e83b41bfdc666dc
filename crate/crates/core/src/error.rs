//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function or distribution.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid encoding configuration, run configuration or simulation design.
    #[error("configuration error: {0}")]
    Config(String),

    /// A CSV cell could not be read or validated.
    #[error("row {row}, column \"{column}\": {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    /// The response cannot support the requested model (e.g. a hurdle fit
    /// without zeros).
    #[error("structural error: {0}")]
    Structure(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    /// The optimizer stopped before meeting the gradient tolerance.
    #[error("no convergence after {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    /// Complete or quasi-complete separation in the binary hurdle part.
    #[error("perfect separation in the hurdle equation on column \"{column}\"")]
    Separation { column: String },

    #[error("unknown coefficient \"{0}\"")]
    UnknownName(String),

    #[error("unsupported model family: {0}")]
    UnsupportedFamily(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
