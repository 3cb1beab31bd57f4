use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no votes")]
    NoVotes,
    #[error("heterogeneous task: expected {expected}, found {found}")]
    HeterogeneousTask { expected: String, found: String },
    #[error("no majority outcome for task {0}")]
    MissingOutcome(String),
    #[error("degenerate residuals")]
    DegenerateResiduals,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("insufficient capacity: {0}")]
    InsufficientCapacity(String),
    #[error("unknown profile: {0}")]
    UnknownProfile(String),
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("non-nested fit: full log-likelihood {full} is below nested {nested}")]
    NonNestedFit { full: f64, nested: f64 },
    #[error("model not calibrated")]
    ModelNotCalibrated,
    #[error("Assumption 1 requires odd n (got {0})")]
    EvenRepeats(usize),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
