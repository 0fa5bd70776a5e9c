use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("node {node} out of range for graph with {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("non-positive edge weight {weight} on ({source_node}, {target})")]
    NonPositiveWeight {
        source_node: usize,
        target: usize,
        weight: f64,
    },

    #[error("duplicate edge ({source_node}, {target})")]
    DuplicateEdge { source_node: usize, target: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty graph")]
    EmptyGraph,

    #[error("graph must be {0}")]
    Directedness(&'static str),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("node {0} has no label")]
    MissingLabel(usize),

    #[error("invalid distribution row {row}: {message}")]
    InvalidDistribution { row: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("degenerate verification design: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
