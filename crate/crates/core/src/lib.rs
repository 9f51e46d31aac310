//! Optimal prediction of collective variables.
//!
//! Given a prior (invariant) Gaussian or Gaussianised measure on the state of
//! a Hamiltonian system and measured values of a few linear functionals of
//! that state, the crate computes conditional means, covariances and Gaussian
//! moments, and closes an ODE system for the mean future values of the
//! functionals. Two model problems are included: a linear Schrödinger
//! equation solved spectrally, where the exact conditioned evolution is
//! available, and a nonlinear Hamiltonian lattice whose ground truth is an
//! ensemble of fine-scale trajectories started from a Metropolis sample of the
//! conditioned canonical density.

pub mod conditioning;
pub mod error;
pub mod lattice;
pub mod mcmc;
pub mod ode;
pub mod policy;
pub mod seed;
pub mod spectral_linear;
pub mod stats;

pub use error::{Error, Result};
pub use policy::NumericalPolicy;
