use thiserror::Error;

use crate::estimator::HypothesisSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },

    #[error("edge {edge} has non-positive variance {variance}")]
    NonpositiveVariance { edge: usize, variance: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("odometric path is missing edge between nodes {0} and {1}")]
    OdometricPathMissing(usize, usize),

    #[error("cycle basis canonicalization failed: {0}")]
    CanonicalizationFailure(String),

    #[error("singular conditioning block")]
    SingularBlock,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("value {value} is outside the admissible range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("hypothesis set too large: {} candidates exceed cap {cap}", describe_cardinality(.set))]
    CapExceeded { cap: usize, set: Box<HypothesisSet> },

    #[error("search budget exceeded: {needed} evaluations requested, budget {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: non-positive orientation information {value}")]
    NonpositiveInformation { line: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_cardinality(set: &HypothesisSet) -> String {
    match set.cardinality() {
        Some(c) => c.to_string(),
        None => format!("~1e{:.1}", set.log10_cardinality()),
    }
}
