use thiserror::Error;

use crate::model::VarId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("variable {0} is not a decision variable")]
    NotADecision(VarId),

    #[error("unknown variable {0}")]
    UnknownVariable(VarId),

    #[error("strategy does not match the diagram: {0}")]
    StrategyMismatch(String),

    #[error("instance too large: {what} ({size} exceeds cap {cap})")]
    TooLarge { what: &'static str, size: u128, cap: u128 },

    #[error("set at node {node} would hold {size} potentials (cap {cap})")]
    SetTooLarge { node: usize, size: u128, cap: u128 },

    #[error("cardinality mismatch for variable {var}: {left} vs {right}")]
    CardinalityMismatch { var: VarId, left: usize, right: usize },

    #[error("variables {0:?} are not in the scope")]
    NotInScope(Vec<VarId>),

    #[error("covering factor must exceed 1, got {0}")]
    InvalidAlpha(f64),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("unknown decomposition node {0}")]
    UnknownNode(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no node covers the family of {0}")]
    FamilyNotCovered(VarId),
}
