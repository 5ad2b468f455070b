use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("not a Lie bracket: Jacobi residual {residual:e}")]
    NotLie { residual: f64 },

    #[error("singular basis change (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("not a derivation: Leibniz residual {residual:e}")]
    NotDerivation { residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("the zero bracket has no moment map")]
    ZeroBracket,

    #[error("dimension {dim} exceeds the search bound {bound}")]
    TooLarge { dim: usize, bound: usize },

    #[error("Jordan decomposition failed: eigenvalue clustering left residual {residual:e}")]
    Clustering { residual: f64 },

    #[error("curve did not converge: Cauchy gap {gap:e} at t = {t}")]
    NoConvergence { gap: f64, t: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown corpus entry {0:?}")]
    UnknownAlgebra(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
