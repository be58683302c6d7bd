use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operator is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularOperator { condition: f64 },

    #[error("iteration limit reached after {iterations} steps (last residual {residual:.3e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("outside solver regime: {0}")]
    Regime(String),

    #[error("finite-difference step too large: {0}")]
    StepTooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
