//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: max asymmetry {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("eigendecomposition failed for dim {dim}: {detail}")]
    EigenFailure { dim: usize, detail: String },

    #[error("domain error in {context}: {detail}")]
    Domain { context: &'static str, detail: String },

    #[error("resource cap exceeded: need {needed} units, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("property violated: {0}")]
    Property(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: input problems map to 2,
    /// violated mathematical properties to 3, resource caps to 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Property(_) => 3,
            Error::CapExceeded { .. } => 4,
            _ => 3,
        }
    }
}
