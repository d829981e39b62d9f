use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {0} is empty")]
    EmptyClass(&'static str),
    #[error("member {member} entry {entry}: value {value} outside [{lower}, {upper}]")]
    BoundViolation {
        member: usize,
        entry: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("{what} domain violation at index {index}: argument {value}")]
    Domain {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("optimal occupancy uncovered by data at state {state}, action {action}")]
    Uncovered { state: usize, action: usize },
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error("non-finite objective value")]
    NonFiniteObjective,
    #[error("bisection bracket does not contain a root")]
    Bracket,
    #[error("every model in the class assigns zero likelihood to the data")]
    ZeroLikelihood,
    #[error("singular linear system")]
    Singular,
}

pub type Result<T> = core::result::Result<T, Error>;
