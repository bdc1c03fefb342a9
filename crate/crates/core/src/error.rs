use thiserror::Error;

/// Errors produced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("linear system is inconsistent (residual {0:e})")]
    InconsistentSystem(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("unsupported constraint form: {0}")]
    Unsupported(String),

    #[error("set is empty: {0}")]
    EmptySet(String),

    #[error("global optimizer failure: {0}")]
    GlobalFailure(String),

    #[error("inner solver reached its iteration limit (value {value}, violation {violation:e})")]
    InnerIterLimit { value: f64, violation: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
