use thiserror::Error;

pub type Result<T, E = FdrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FdrError {
    #[error("unknown divergence generator `{0}`")]
    UnknownGenerator(String),

    #[error("invalid alpha {0}: must be finite and differ from 0 and 1")]
    InvalidAlpha(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid loss value {value} at position {index}")]
    InvalidLoss { index: usize, value: f64 },

    #[error("lambda={lambda} is not admissible; lambda_star={lambda_star}")]
    Infeasible { lambda: f64, lambda_star: f64 },

    #[error("lambda={lambda} lies on the boundary of the admissible set")]
    Boundary { lambda: f64 },

    #[error("argument {t} is outside the domain of the inverse derivative at atom `{atom}`")]
    Domain { atom: String, t: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("oracle did not converge: {message}")]
    NonConvergence { message: String, trace: Vec<(usize, f64)> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
