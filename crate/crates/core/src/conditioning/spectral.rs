use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{ConstraintFactor, KernelRepr, KernelSet, SpectralCoeffs};
use crate::error::{invalid, Result};
use crate::policy::NumericalPolicy;

/// Translation-invariant Gaussian prior on `(0, 2π]` with zero mean, identical
/// independent components and covariance `C(x, y) = Σ_{|k|≤K} ĉ(k) e^{ik(x−y)}`.
#[derive(Debug, Clone)]
pub struct SpectralPrior {
    k_max: usize,
    // ĉ(k) for k = 0..=K (ĉ is even in k).
    spectrum: Vec<f64>,
}

impl SpectralPrior {
    pub fn new(k_max: usize, spectrum: Vec<f64>) -> Result<Self> {
        if spectrum.len() != k_max + 1 {
            return Err(invalid("spectrum must hold one value per |k| <= K"));
        }
        if spectrum.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("spectral density must be finite and non-negative"));
        }
        Ok(Self { k_max, spectrum })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn density(&self, k: i64) -> f64 {
        self.spectrum.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// `C(r)` at separation `r`.
    pub fn covariance_at(&self, r: f64) -> f64 {
        self.spectrum[0]
            + 2.0
                * (1..=self.k_max)
                    .map(|k| self.spectrum[k] * (k as f64 * r).cos())
                    .sum::<f64>()
    }

    /// `Σ_k w(k) (2π)² ĉ(k) Re[conj ĝ_α(k) ĝ_β(k)]` for two kernels on the
    /// same component.
    pub fn pair_sum(&self, a: &SpectralCoeffs, b: &SpectralCoeffs, weight: impl Fn(i64) -> f64) -> f64 {
        let k_max = self.k_max.min(a.k_max()).min(b.k_max()) as i64;
        (-k_max..=k_max)
            .map(|k| weight(k) * self.density(k) * (a.at(k).conj() * b.at(k)).re)
            .sum::<f64>()
            * (2.0 * PI).powi(2)
    }

    /// Constraint covariance by spectral summation. Kernels on different
    /// components are uncorrelated.
    pub fn constraint_covariance(&self, kernels: &KernelSet, policy: &NumericalPolicy) -> Result<DMatrix<f64>> {
        Ok(self.factor(kernels, policy)?.matrix().clone())
    }

    pub fn factor(&self, kernels: &KernelSet, policy: &NumericalPolicy) -> Result<ConstraintFactor> {
        let m = self.weighted_matrix(kernels, |_| 1.0)?;
        ConstraintFactor::new(m, policy)
    }

    /// Matrix of [`SpectralPrior::pair_sum`] over all kernel pairs.
    pub fn weighted_matrix(&self, kernels: &KernelSet, weight: impl Fn(i64) -> f64) -> Result<DMatrix<f64>> {
        let coeffs = spectral_coeffs(kernels)?;
        let n = kernels.len();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                if kernels.get(a).component != kernels.get(b).component {
                    continue;
                }
                let v = self.pair_sum(coeffs[a], coeffs[b], &weight);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    /// `(C g)(x) = 2π Σ_k ĉ(k) ĝ(k) e^{ikx}`.
    pub fn cross_covariance(&self, kernel: &SpectralCoeffs, x: f64) -> f64 {
        let k_max = self.k_max.min(kernel.k_max()) as i64;
        let mut acc = self.density(0) * kernel.at(0).re;
        for k in 1..=k_max {
            let term = kernel.at(k) * num_complex::Complex64::from_polar(1.0, k as f64 * x);
            acc += 2.0 * self.density(k) * term.re;
        }
        2.0 * PI * acc
    }
}

pub(crate) fn spectral_coeffs(kernels: &KernelSet) -> Result<Vec<&SpectralCoeffs>> {
    kernels
        .iter()
        .map(|k| match &k.repr {
            KernelRepr::Spectral(s) => Ok(s),
            KernelRepr::Grid(_) => Err(invalid("expected spectral kernels")),
        })
        .collect()
}
