use thiserror::Error;

/// Errors raised by the combinatorial and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate values in sequence")]
    DuplicateValues,
    #[error("not a permutation of 1..n")]
    NotAPermutation,
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("pattern of size {pattern} larger than host of size {host}")]
    PatternLargerThanHost { pattern: usize, host: usize },
    #[error("size {size} exceeds the enumeration limit {limit}")]
    SizeTooLarge { size: usize, limit: usize },
    #[error("increment ({dx},{dy}) at index {index} is not in the step set")]
    BadIncrement { index: usize, dx: i64, dy: i64 },
    #[error("walk leaves the quadrant at index {index}")]
    LeftQuadrant { index: usize },
    #[error("walk must start on the y-axis and end on the x-axis")]
    BadEndpoints,
    #[error("empty walk")]
    EmptyWalk,
    #[error("relation is not a total order")]
    NotTotalOrder,
    #[error("pair of coalescent processes is not in the image of wpc")]
    NotInImage,
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("interval [{lo},{hi}] is not inside the label interval")]
    BadInterval { lo: i64, hi: i64 },
    #[error("grid resolutions differ: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("start time is not on the grid")]
    OffGridStart,
    #[error("epsilon must lie in (0, 1/2)")]
    BadEpsilon,
    #[error("invalid map: {0}")]
    InvalidMap(String),
}

pub type Result<T> = std::result::Result<T, Error>;
