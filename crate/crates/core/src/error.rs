use thiserror::Error;

/// Everything that can go wrong while building a model or running a check.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("quadrature did not converge: {what} changed by {change:.3e} under refinement")]
    Quadrature { what: String, change: f64 },
    #[error("basis/case mismatch: {0}")]
    BasisMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-positive input: {0}")]
    NonPositive(String),
    #[error("discretization unstable: {0}")]
    Unstable(String),
    #[error("coercivity estimate {0:.3e} is not positive")]
    Coercivity(f64),
    #[error("resolution check failed: {0}")]
    Resolution(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("support leaves the grid: {0}")]
    Support(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
