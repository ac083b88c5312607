use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("seed set is empty")]
    EmptySeeds,

    #[error("node {node} out of range for a graph of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("node {0} has no out-neighbors")]
    Dangling(usize),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("operator is reducible: column {0} has no positive entry")]
    ZeroColumn(usize),

    #[error("invalid operator entry ({row}, {col}) = {value}")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("empirical measure is empty")]
    EmptyMeasure,

    #[error("visit weight overflowed at step {0}")]
    WeightOverflow(u64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("vector is not a probability distribution (sum = {0})")]
    NotNormalized(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}
