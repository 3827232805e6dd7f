use thiserror::Error;

/// Errors produced by the detection pipeline and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (pivot {pivot:.3e} below tolerance {tol:.3e} at column {column})")]
    RankDeficient { column: usize, pivot: f64, tol: f64 },

    #[error("linear system is singular")]
    Singular,

    #[error("expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },

    #[error("{q} binary variables exceeds the exhaustive bound of {max}")]
    TooManyVariables { q: usize, max: usize },

    #[error("regularization weight {0} > 0 requires an MMSE reference")]
    MissingReference(f64),

    #[error("template bank: {0}")]
    Bank(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incomplete SNR grid: {0}")]
    IncompleteGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
