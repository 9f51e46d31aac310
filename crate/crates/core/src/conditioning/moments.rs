use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Field;
use crate::error::{invalid, Error, Result};
use crate::policy::NumericalPolicy;

/// Mean and covariance of a Gaussian measure on a gridded field.
///
/// The covariance is stored densely in the component-major flat layout; the
/// `(i, j)` component block is available through [`GaussianMoments::block`].
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    mean: Field,
    cov: DMatrix<f64>,
}

impl GaussianMoments {
    /// Validates symmetry and positive semi-definiteness (eigenvalues above
    /// `-spd_rel_eps × max diagonal`).
    pub fn new(mean: Field, cov: DMatrix<f64>, policy: &NumericalPolicy) -> Result<Self> {
        let dim = mean.d() * mean.n();
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: "covariance size",
                expected: dim,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        let max_diag = cov.diagonal().amax();
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariance has non-finite entries"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
            return Err(invalid(format!("covariance is not symmetric (max asymmetry {asym:e})")));
        }
        // Cholesky of the matrix shifted by twice the allowed slack succeeds
        // iff the minimum eigenvalue is above the floor (up to rounding).
        let shift = 2.0 * policy.spd_rel_eps * max_diag + f64::MIN_POSITIVE;
        let shifted = &cov + DMatrix::identity(dim, dim) * shift;
        if shifted.cholesky().is_none() {
            return Err(invalid("covariance is not positive semi-definite"));
        }
        Ok(Self { mean, cov })
    }

    pub fn zero_mean(d: usize, n: usize, spacing: f64, cov: DMatrix<f64>, policy: &NumericalPolicy) -> Result<Self> {
        Self::new(Field::zeros(d, n, spacing)?, cov, policy)
    }

    pub fn mean(&self) -> &Field {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn d(&self) -> usize {
        self.mean.d()
    }

    pub fn n(&self) -> usize {
        self.mean.n()
    }

    pub fn dim(&self) -> usize {
        self.d() * self.n()
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrixView<'_, f64> {
        let n = self.n();
        self.cov.view((i * n, j * n), (n, n))
    }

    /// Prepares a sampler (symmetric square root of the covariance).
    pub fn sampler(&self) -> GaussianSampler {
        let eig = SymmetricEigen::new(self.cov.clone());
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        GaussianSampler {
            mean: self.mean.flatten(),
            root,
        }
    }
}

/// Draws `mean + L z` with `L Lᵀ = C`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.root.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.root * z
    }
}

/// Circulant matrix with first row `c` (`C[i][j] = c[(j - i) mod n]`).
pub fn circulant(c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    DMatrix::from_fn(n, n, |i, j| c[(j + n - i) % n])
}

/// Block-diagonal covariance with identical blocks for each of `d` components.
pub fn block_diagonal(block: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = block.nrows();
    let mut out = DMatrix::zeros(d * n, d * n);
    for i in 0..d {
        out.view_mut((i * n, i * n), (n, n)).copy_from(block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let p = NumericalPolicy::default();
        let mean = Field::zeros(1, 2, 1.0).unwrap();
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianMoments::new(mean.clone(), indef, &p).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianMoments::new(mean.clone(), asym, &p).is_err());
        // Singular but PSD is fine.
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianMoments::new(mean, sing, &p).is_ok());
    }

    #[test]
    fn sampler_reproduces_covariance() {
        let p = NumericalPolicy::default();
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let g = GaussianMoments::zero_mean(1, 2, 1.0, cov.clone(), &p).unwrap();
        let s = g.sampler();
        let mut rng = seed::rng(3);
        let m = 200_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..m {
            let x = s.draw(&mut rng);
            acc += &x * x.transpose();
        }
        acc /= m as f64;
        // Standard error of a second moment is about sqrt(2) c / sqrt(m).
        for i in 0..2 {
            for j in 0..2 {
                let se = (cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)).sqrt() / (m as f64).sqrt();
                assert!((acc[(i, j)] - cov[(i, j)]).abs() < 4.0 * se, "{i}{j}: {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn circulant_layout() {
        let c = circulant(&[3.0, 2.0, 1.0, 2.0]);
        assert_eq!(c[(0, 1)], 2.0);
        assert_eq!(c[(1, 0)], 2.0);
        assert_eq!(c[(3, 1)], 1.0);
        assert_eq!(c, c.transpose());
    }
}
