use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlqualError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("phi is infinite at the query point: {0}")]
    PhiInfinite(String),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("not a cone: {0}")]
    NotACone(String),
    #[error("dimension too large: {0}")]
    DimensionTooLarge(String),
    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("penalty parameter cap reached: {0}")]
    CapReached(String),
    #[error("projection failure: {0}")]
    ProjectionFailure(String),
    #[error("pattern budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NlqualError>;
