use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semi-definite (minimum eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("closed loop is not stable (spectral radius {rho})")]
    UnstableClosedLoop { rho: f64 },

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("system is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("invariant violated at round {round}: {detail}")]
    InvariantViolation { round: usize, detail: String },

    #[error("reset loop did not converge within {iterations} iterations (last step {last_step:e})")]
    ResetDivergence { iterations: usize, last_step: f64 },

    #[error("degenerate bound: {0}")]
    Degenerate(String),

    #[error("config: {0}")]
    Config(String),

    #[error("system generation failed: {0}")]
    Generation(String),

    #[error("comparator: {0}")]
    Comparator(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
