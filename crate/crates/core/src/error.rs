use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition row (state {state}, action {action}) sums to {sum}, expected 1")]
    NonStochasticRow { state: usize, action: usize, sum: f64 },

    #[error("transition row (state {state}, action {action}) has invalid probability {value}")]
    BadProbability { state: usize, action: usize, value: f64 },

    #[error("transition row (state {state}, action {action}) is missing")]
    MissingRow { state: usize, action: usize },

    #[error("transition row (state {state}, action {action}) given twice")]
    DuplicateRow { state: usize, action: usize },

    #[error("policy row {state} is not a probability distribution (sum {sum})")]
    NonStochasticPolicy { state: usize, sum: f64 },

    #[error("discount {0} outside [0, 1)")]
    BadDiscount(f64),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value estimate must be frozen before computing prediction errors")]
    EstimateNotFrozen,

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("{count} deterministic policies exceed the enumeration limit of {limit}")]
    TooLargeToEnumerate { count: u128, limit: u64 },

    #[error("goal set is empty")]
    EmptyGoalSet,

    #[error("goal state {0} listed twice")]
    DuplicateGoal(usize),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("trajectory was recorded under a different policy parameterization")]
    MismatchedPolicy,

    #[error("behavior policy never takes action {action} in state {state}, which the target policy uses")]
    NoCoverage { state: usize, action: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, size })
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
