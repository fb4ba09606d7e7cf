use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpcnError {
    #[error("point ({0}, {1}, {2}) lies outside the octree bounds")]
    PointOutOfBounds(f32, f32, f32),
    #[error("point id {0} is already indexed")]
    DuplicatePoint(u32),
    #[error("point id {0} is not indexed in the cloud")]
    UnknownPoint(u32),
    #[error("empty point set: {0}")]
    EmptySet(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("k = {k} exceeds cloud size n = {n}")]
    KnnTooLarge { k: usize, n: usize },
    #[error("ring expansion exceeded the 2^depth safety cap at ring {0}")]
    RingCapExceeded(u32),
    #[error("hub lists do not cover every central exactly once (central {0})")]
    CoverageViolation(u32),
    #[error("feature matrix has {got} columns, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("baseline counter {0} is zero; savings undefined")]
    ZeroBaseline(&'static str),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, LpcnError>;
