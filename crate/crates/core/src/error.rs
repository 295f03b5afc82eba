use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid protocol spec: {0}")]
    InvalidSpec(String),

    #[error("kernel kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("sample ({k}, {tau}) lies within {radius} of the singular locus k = -delta0*tau")]
    SingularLocus { k: f64, tau: f64, radius: f64 },

    #[error("decomposition failed: {context} (dim {dim}, max |entry| {max_abs:.3e})")]
    Decomposition {
        context: String,
        dim: usize,
        max_abs: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("CFL violation: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("solver state became non-finite at step {step}")]
    SolverDiverged { step: usize },

    #[error("fit requires at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
