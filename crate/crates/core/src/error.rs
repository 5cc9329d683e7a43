use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative transition probability at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("transition probability above one at ({row}, {col})")]
    EntryAboveOne { row: usize, col: usize },

    #[error("row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: String },

    #[error("absorbing state {0} does not map to itself with probability 1")]
    AbsorbingRow(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("duplicate state `{0}`")]
    DuplicateState(String),

    #[error("state index {0} is out of range")]
    StateOutOfRange(usize),

    #[error("empty path")]
    EmptyPath,

    #[error("empty input")]
    EmptyInput,

    #[error("target set is not reached almost surely from state {0}")]
    UnreachableTarget(usize),

    #[error("trajectory exceeded the step cap of {0}")]
    StepCapExceeded(u64),

    #[error("subset sequence is not nested at level {0}")]
    NotNested(usize),

    #[error("cannot concatenate: first path ends where the second does not start")]
    EndpointMismatch,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("linear solve residual {0:e} exceeds tolerance")]
    Residual(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("guard exceeded: {0}")]
    Guard(String),

    #[error("tail bound {tail:e} is above the requested tolerance {tolerance:e}")]
    TailTooLarge { tail: f64, tolerance: f64 },

    #[error("numeric mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: String, found: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid carpet template: {}", .0.join("; "))]
    InvalidTemplate(Vec<String>),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
