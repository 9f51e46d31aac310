//! Gaussian priors on gridded fields and their conditioning on linear
//! functionals (collective variables).

mod conditioned;
mod constraint;
mod field;
mod kernels;
mod moments;
mod spectral;
mod wick;

pub use conditioned::{
    conditional_covariance, conditional_cubic, conditional_mean, constraint_covariance, regression_coefficients,
    ConditionedGaussian, ConstrainedPrior,
};
pub use constraint::ConstraintFactor;
pub use field::Field;
pub use kernels::{delta_kernel, Kernel, KernelRepr, KernelSet, SpectralCoeffs};
pub use moments::{block_diagonal, circulant, GaussianMoments, GaussianSampler};
pub use spectral::SpectralPrior;
pub use wick::{pairing_count, wick_moment, MomentKind, StateIndex, MAX_WICK_ORDER};
