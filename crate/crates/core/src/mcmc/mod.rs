//! Metropolis sampling of canonical densities, optionally restricted to an
//! affine subspace of states with prescribed collective variables.

mod chain;
mod constrained;
pub mod dump;
mod target;

pub use chain::{run_chain, run_chain_with, ChainConfig, ChainDiagnostics, ChainRun, MetropolisChain, SampleSet};
pub use constrained::{
    feasible_point, run_constrained_chain, run_constrained_chain_with, ConstraintMode, ConstraintSystem,
    PenalizedTarget, ProjectedChain,
};
pub use target::{Flat, GaussianTarget, Quartic1d, TargetDensity};
