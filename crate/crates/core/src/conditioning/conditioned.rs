use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{ConstraintFactor, Field, GaussianMoments, KernelSet};
use crate::error::{Error, Result};
use crate::policy::NumericalPolicy;

/// `M = G C Gᵀ`, the prior covariance of the collective variables.
pub fn constraint_covariance(
    prior: &GaussianMoments,
    kernels: &KernelSet,
    policy: &NumericalPolicy,
) -> Result<DMatrix<f64>> {
    let g = kernel_matrix(prior, kernels)?;
    let m = &g * prior.covariance() * g.transpose();
    Ok(ConstraintFactor::new(m, policy)?.matrix().clone())
}

/// Regression coefficients `c_α = Σ_β (C g_β) M⁻¹_{βα}`, one field per kernel.
pub fn regression_coefficients(
    prior: &GaussianMoments,
    kernels: &KernelSet,
    policy: &NumericalPolicy,
) -> Result<Vec<Field>> {
    ConstrainedPrior::with_policy(prior.clone(), kernels.clone(), *policy).map(|c| c.regression_coefficients())
}

/// Conditional covariance `C − Σ_α c_α ⊗ (G C)_α`. Takes no constraint values:
/// conditioning a Gaussian on linear data shifts the mean only.
pub fn conditional_covariance(
    prior: &GaussianMoments,
    kernels: &KernelSet,
    policy: &NumericalPolicy,
) -> Result<DMatrix<f64>> {
    ConstrainedPrior::with_policy(prior.clone(), kernels.clone(), *policy).map(|c| c.covariance().clone())
}

/// Conditional mean field `⟨u⟩_V`.
pub fn conditional_mean(cond: &ConditionedGaussian) -> Field {
    cond.mean().clone()
}

/// Conditional third raw moment of one site, `3⟨u²⟩⟨u⟩ − 2⟨u⟩³` with
/// `⟨u²⟩ = ⟨u⟩² + var`.
pub fn conditional_cubic(cond: &ConditionedGaussian, site: usize, component: usize) -> f64 {
    let m = cond.mean().component(component)[site];
    let flat = component * cond.prior().n() + site;
    let var = cond.covariance()[(flat, flat)];
    let second = m * m + var;
    3.0 * second * m - 2.0 * m * m * m
}

fn kernel_matrix(prior: &GaussianMoments, kernels: &KernelSet) -> Result<DMatrix<f64>> {
    match kernels.n() {
        Some(n) if n == prior.n() => {}
        Some(n) => {
            return Err(Error::DimensionMismatch {
                what: "kernel grid size",
                expected: prior.n(),
                found: n,
            })
        }
        None => return Err(Error::InvalidInput("conditioning on a grid prior needs grid kernels".into())),
    }
    kernels.matrix(prior.d())
}

/// A Gaussian prior together with a set of kernels, with every quantity that
/// does not depend on the measured values cached: `M`, its factorisation, the
/// regression coefficients and the conditional covariance.
#[derive(Debug)]
pub struct ConstrainedPrior {
    prior: GaussianMoments,
    kernels: KernelSet,
    policy: NumericalPolicy,
    g: DMatrix<f64>,
    factor: ConstraintFactor,
    // (d·n) × N, column α is c_α flattened.
    coeffs: DMatrix<f64>,
    cov: DMatrix<f64>,
    unconditional: DVector<f64>,
}

impl ConstrainedPrior {
    pub fn new(prior: GaussianMoments, kernels: KernelSet) -> Result<Arc<Self>> {
        Self::with_policy(prior, kernels, NumericalPolicy::default())
    }

    pub fn with_policy(prior: GaussianMoments, kernels: KernelSet, policy: NumericalPolicy) -> Result<Arc<Self>> {
        let g = kernel_matrix(&prior, &kernels)?;
        let c = prior.covariance();
        let cross = c * g.transpose();
        let m = &g * &cross;
        let factor = ConstraintFactor::new(m, &policy)?;
        // c_α columns: C Gᵀ M⁻¹, computed as (M⁻¹ G C)ᵀ through the factor.
        let coeffs = factor.solve(&cross.transpose()).transpose();
        let mut cov = c - &coeffs * cross.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        let unconditional = &g * prior.mean().flatten();
        Ok(Arc::new(Self {
            prior,
            kernels,
            policy,
            g,
            factor,
            coeffs,
            cov,
            unconditional,
        }))
    }

    /// Conditions on measured values `V` (one per kernel).
    pub fn condition(self: &Arc<Self>, values: &[f64]) -> Result<ConditionedGaussian> {
        if values.len() != self.kernels.len() {
            return Err(Error::DimensionMismatch {
                what: "constraint values",
                expected: self.kernels.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint values must be finite".into()));
        }
        let v = DVector::from_column_slice(values);
        let mean_flat = self.mean_flat(&v);
        let mean = Field::from_flat(mean_flat.as_slice(), self.prior.d(), self.prior.mean().spacing())?;
        Ok(ConditionedGaussian {
            base: Arc::clone(self),
            values: v,
            mean,
        })
    }

    /// `mean + Σ_α c_α (V_α − ⟨U_α⟩)` in flat layout.
    pub fn mean_flat(&self, values: &DVector<f64>) -> DVector<f64> {
        self.prior.mean().flatten() + &self.coeffs * (values - &self.unconditional)
    }

    pub fn prior(&self) -> &GaussianMoments {
        &self.prior
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn policy(&self) -> &NumericalPolicy {
        &self.policy
    }

    /// Kernel rows `G` on the flat state.
    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn factor(&self) -> &ConstraintFactor {
        &self.factor
    }

    pub fn constraint_covariance(&self) -> &DMatrix<f64> {
        self.factor.matrix()
    }

    pub fn m_inverse(&self) -> &DMatrix<f64> {
        self.factor.inverse()
    }

    /// Regression coefficients as a `(d·n) × N` matrix.
    pub fn coefficient_matrix(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn regression_coefficients(&self) -> Vec<Field> {
        let d = self.prior.d();
        let h = self.prior.mean().spacing();
        self.coeffs
            .column_iter()
            .map(|col| Field::from_flat(col.as_slice(), d, h).expect("coefficient layout matches prior"))
            .collect()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `G · mean`, the unconditional means of the collective variables.
    pub fn unconditional_means(&self) -> &DVector<f64> {
        &self.unconditional
    }
}

/// The prior conditioned on measured values of the collective variables.
#[derive(Debug, Clone)]
pub struct ConditionedGaussian {
    base: Arc<ConstrainedPrior>,
    values: DVector<f64>,
    mean: Field,
}

impl ConditionedGaussian {
    pub fn new(prior: GaussianMoments, kernels: KernelSet, values: &[f64]) -> Result<Self> {
        ConstrainedPrior::new(prior, kernels)?.condition(values)
    }

    pub fn base(&self) -> &Arc<ConstrainedPrior> {
        &self.base
    }

    pub fn prior(&self) -> &GaussianMoments {
        self.base.prior()
    }

    pub fn kernels(&self) -> &KernelSet {
        self.base.kernels()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn mean(&self) -> &Field {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.base.covariance()
    }

    pub fn m_inverse(&self) -> &DMatrix<f64> {
        self.base.m_inverse()
    }

    /// `max_α |U_α[⟨u⟩_V] − V_α|`, relative to `max(1, ‖V‖∞)`.
    pub fn constraint_residual(&self) -> f64 {
        let u = self.base.kernel_matrix() * self.mean.flatten();
        let scale = self.values.amax().max(1.0);
        (u - &self.values).amax() / scale
    }
}
