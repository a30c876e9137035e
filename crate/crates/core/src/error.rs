use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("unknown station {0}")]
    UnknownStation(String),
    #[error("unknown train {0}")]
    UnknownTrain(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid border change: {0}")]
    InvalidBorder(String),
    #[error("malformed track range: {0}")]
    MalformedRange(String),
    #[error("ranges do not intersect in order")]
    NoIntersection,
    #[error("non-uniform sampling: {0}")]
    Sampling(String),
    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
    #[error("caps exceeded: {0}")]
    CapsExceeded(String),
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
