//! Approximate maximum-expected-utility strategies for limited-memory
//! influence diagrams.
//!
//! The pipeline is: build a tree decomposition of the diagram, reduce the
//! diagram to a single value variable, renormalize utilities to `[0, 1]`,
//! and propagate sets of potentials from the leaves of the decomposition to
//! its root, pruning each set to an α-covering. The root yields a value `E`
//! with `MEU <= (1 + ε) E` together with a strategy attaining `E`.
//!
//! [`model::brute_force_meu`] enumerates pure strategies and is the oracle
//! the propagation is tested against.

pub mod error;
pub mod generate;
pub mod model;
pub mod potential;
pub mod reduction;
pub mod solver;
pub mod treedecomp;

pub use error::{Error, Result};
pub use model::{
    brute_force_meu, enumerate_pure_policies, expected_utility, validate_diagram, Cpt,
    DiagramBuilder, InfluenceDiagram, Policy, RewardTable, Strategy, VarId, VarKind, Variable,
};
pub use potential::{covering, CoveringStats, Potential, PotentialSet, Provenance};
pub use reduction::{normalize_utilities, reduce_to_single_value, utility_bounds, ReductionResult};
pub use solver::{solve, solve_full, SolverConfig, SolverResult};
pub use treedecomp::TreeDecomposition;
