use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence must contain at least {min} element(s), got {got}")]
    TooShort { min: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sequence is not constant amplitude (d_ca = {d_ca:e}, limit {limit:e})")]
    NotConstantAmplitude { d_ca: f64, limit: f64 },

    #[error("sequence too far from CAZAC (d = {d:e}, limit {limit:e})")]
    TooFarFromCazac { d: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations and {restarts} restarts (best d = {best:e})")]
    NonConvergence {
        iterations: usize,
        restarts: usize,
        best: f64,
    },

    #[error("singular Jacobian (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("Newton iteration limit reached after {iterations} iterations (residual {residual:e}, best iterate {best:?})")]
    MaxIters {
        iterations: usize,
        residual: f64,
        best: [f64; 3],
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
