use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("incompatible code lengths: expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("code length {0} outside the supported range 1..={max}", max = crate::codes::MAX_CODE_LEN)]
    CodeLength(usize),

    #[error("code set is empty")]
    EmptyCodeSet,

    #[error("extension width must be at least 1")]
    ZeroExtension,

    #[error("radius {radius} out of range for {code_len}-bit codes")]
    RadiusOutOfRange { radius: usize, code_len: usize },

    #[error("probing radius {radius} needs {needed} cumulative probes, budget is {budget}")]
    ProbeBudgetExceeded {
        radius: usize,
        needed: u128,
        budget: u128,
    },

    #[error("query has no ground-truth neighbors, so average precision and recall are undefined")]
    EmptyGroundTruth,

    #[error("no query has a ground-truth neighbor")]
    NoValidQueries,

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} labels for {1} points")]
    LabelCount(usize, usize),

    #[error("database id {id} out of range for {db_size} points")]
    IdOutOfRange { id: usize, db_size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}
