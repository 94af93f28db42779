use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cloud")]
    EmptyCloud,

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for cloud of {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("banana map requires d >= 2")]
    BananaDimension,

    #[error("step index {index} out of schedule range (max {max})")]
    ScheduleOutOfRange { index: usize, max: usize },

    /// A non-finite position appeared mid-run; `level` is the population
    /// size when it happened inside a branched run, `None` for plain runs.
    #[error("divergent dynamics at iteration {iteration}")]
    DivergentDynamics {
        iteration: usize,
        level: Option<usize>,
    },

    #[error("branching requires exactly one spine, found {spines}")]
    InvalidBranchState { spines: usize },

    #[error("empirical Wasserstein requires equal sample sizes")]
    UnequalSampleSizes { left: usize, right: usize },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse failure: {0}")]
    Parse(String),
}
