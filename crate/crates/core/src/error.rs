use thiserror::Error;

/// Errors produced by instance construction, mechanism sampling, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("distance matrix is asymmetric at ({i}, {j}): {a} vs {b}")]
    AsymmetricMatrix { i: usize, j: usize, a: f64, b: f64 },

    #[error("triangle inequality violated on triple ({a}, {b}, {c}): d({a},{b}) = {lhs} > {rhs}")]
    TriangleViolation {
        a: usize,
        b: usize,
        c: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("problem too large: {0}")]
    GuardExceeded(String),

    #[error("solver `{solver}` failed: {message}")]
    SolverFailure { solver: String, message: String },

    #[error("audit refused: {0}")]
    AuditRefused(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
