use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {p} nodes")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("graph size mismatch: {0} vs {1} nodes")]
    SizeMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("value {value} outside the support of node {node} ({family})")]
    Support {
        node: usize,
        value: f64,
        family: String,
    },

    #[error("node-conditional of node {node} not normalizable: natural parameter {eta} >= 0")]
    NotNormalizable { node: usize, eta: f64 },

    #[error("sampler aborted: {0}")]
    SamplerAbort(String),

    #[error("{0}")]
    RetryCapExceeded(String),

    #[error("unsupported for exact moments: {0}")]
    Unsupported(String),

    #[error("enumeration of {0} discrete configurations exceeds cap {1}")]
    EnumerationCap(u128, u128),

    #[error("cross-validation infeasible{}: {reason}; use EBIC selection instead", node.map(|n| format!(" for node {n}")).unwrap_or_default())]
    CvInfeasible { node: Option<usize>, reason: String },

    #[error("constant response: {0}")]
    ConstantResponse(String),

    #[error("graph is not triangulated")]
    NotTriangulated,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
