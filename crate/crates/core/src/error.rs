use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("oracle `{name}` failed: {detail}")]
    OracleFailure { name: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subproblem failure: {0}")]
    SubproblemFailure(String),

    /// The minorant subproblem became empty, which cannot happen when the
    /// supplied optimal value is attained.
    #[error("target value {fstar} is not attainable: prox subproblem infeasible at iteration {iteration}")]
    InvalidTargetValue { fstar: f64, iteration: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain must be bounded: {0}")]
    UnboundedDomain(String),

    #[error("ingest error at row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
