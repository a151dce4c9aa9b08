use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("depth budget must be at least 1")]
    InvalidBudget,
    #[error("circuit with {requested} coherent queries exceeds depth budget {limit}")]
    DepthExceeded { requested: u64, limit: u64 },
    #[error("input size must be a power of two, got {0}")]
    InvalidSize(usize),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("evaluation point {0} outside [-1, 1]")]
    OutOfDomain(f64),
    #[error("required polynomial degree exceeds the hard cap {cap}")]
    DegreeOverflow { cap: usize },
    #[error("window spec requires mu > delta (mu = {mu}, delta = {delta})")]
    InvalidWindow { mu: f64, delta: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
    #[error("fisher information is singular at pi = {0}")]
    Singular(f64),
    #[error("need at least 3 distinct x values for a scaling fit, got {0}")]
    InsufficientData(usize),
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
