use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {node} out of range for graph with {p} nodes")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node counts differ: {left} vs {right}")]
    NodeCountMismatch { left: usize, right: usize },

    #[error("{p} nodes exceeds the exact enumeration limit of {limit}")]
    ExactLimitExceeded { p: usize, limit: usize },

    #[error("malformed spin data: {0}")]
    MalformedSpins(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid misclassification law: {0}")]
    InvalidLaw(String),

    #[error("missing misclassification probability for node {0}")]
    MissingGamma(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all sample weights are zero")]
    DegenerateWeights,

    #[error("component has {count} candidates, above the limit of {limit}")]
    TooManyCandidates { count: usize, limit: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
