use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("cholesky factorization failed after jitter retry")]
    FactorizationFailed,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("trace {cycle_id} has fewer than 2 samples")]
    TooFewSamples { cycle_id: u64 },
    #[error("invalid trace {cycle_id}: {reason}")]
    InvalidTrace { cycle_id: u64, reason: String },
    #[error("non-positive capacity {0}")]
    NonPositiveCapacity(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least {needed} cycles, have {available}")]
    InsufficientCycles { needed: usize, available: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("candidate hidden output is identically zero")]
    ZeroCandidate,
    #[error("training data is empty")]
    EmptyData,
    #[error("no admissible candidate node found")]
    NoCandidateFound,
    #[error("inconsistent growth state: {0}")]
    InconsistentState(String),
    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("target has zero variance")]
    DegenerateTarget,

    #[error("objective returned a non-finite value")]
    NonFiniteObjective,
    #[error("invalid bracket [{0}, {1}]")]
    InvalidBracket(f64, f64),

    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
