use thiserror::Error;

/// Errors raised while building a search space from a definition document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("variable `{name}`: {reason}")]
    Malformed { name: String, reason: String },
    #[error("duplicate variable name `{0}`")]
    Duplicate(String),
    #[error("space definition must be a key-value table, got {0}")]
    NotATable(String),
    #[error("vector has length {got}, space has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("value for `{name}` is outside its domain: {value}")]
    OutOfDomain { name: String, value: String },
    #[error("could not parse space document: {0}")]
    Syntax(String),
}

/// A non-physical or otherwise invalid input to a model equation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("{term}: {detail}")]
    Invalid { term: &'static str, detail: String },
    #[error("current density {j} reached the limiting current {limit}")]
    LimitingCurrent { j: f64, limit: f64 },
}

impl DomainError {
    pub(crate) fn invalid(term: &'static str, detail: impl Into<String>) -> Self {
        DomainError::Invalid {
            term,
            detail: detail.into(),
        }
    }
}

/// Failure of a single fitness evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitnessError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("evaluator failed: {0}")]
    Evaluator(String),
    #[error("evaluation timed out after {0:.3} s")]
    Timeout(f64),
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("candidate #{index} {candidate} returned non-finite fitness {value}")]
    NonFinite {
        index: usize,
        candidate: String,
        value: f64,
    },
    #[error("candidate #{index} {candidate} failed: {source}")]
    Evaluation {
        index: usize,
        candidate: String,
        source: FitnessError,
    },
    #[error("evaluation worker panicked on candidate #{index} {candidate}: {message}")]
    WorkerPanic {
        index: usize,
        candidate: String,
        message: String,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("tuning budget exceeded: {needed} evaluations requested, cap is {cap}")]
    Budget { needed: usize, cap: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = OptError> = std::result::Result<T, E>;
