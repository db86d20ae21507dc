use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("trivial solution: zero vector")]
    TrivialVector,

    #[error("all trivial solutions; increase Δλ (scanned {n_lambda} values from {lambda_min} in steps of {d_lambda})")]
    AllTrivial {
        lambda_min: f64,
        n_lambda: usize,
        d_lambda: f64,
    },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
