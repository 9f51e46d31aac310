use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::policy::NumericalPolicy;

/// Factorised constraint covariance `M` (the covariance of the collective
/// variables under the prior).
#[derive(Debug, Clone)]
pub struct ConstraintFactor {
    m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    inverse: DMatrix<f64>,
    min_eigenvalue: f64,
    condition: f64,
}

impl ConstraintFactor {
    /// Rejects `M` unless it is symmetric positive definite with condition
    /// number at most `policy.max_condition`.
    pub fn new(m: DMatrix<f64>, policy: &NumericalPolicy) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput("constraint covariance must be square and non-empty".into()));
        }
        // Exact symmetrisation; the inputs are symmetric up to rounding.
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(min > 0.0) || condition > policy.max_condition {
            return Err(Error::IllConditioned {
                min_eigenvalue: min,
                condition,
            });
        }
        let chol = m.clone().cholesky().ok_or(Error::IllConditioned {
            min_eigenvalue: min,
            condition,
        })?;
        let inverse = chol.inverse();
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(Self {
            m,
            chol,
            inverse,
            min_eigenvalue: min,
            condition,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Solves `M X = B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn len(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.m.nrows() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_singular_and_badly_conditioned() {
        let p = NumericalPolicy::default();
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(ConstraintFactor::new(sing, &p), Err(Error::IllConditioned { .. })));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        assert!(matches!(ConstraintFactor::new(bad, &p), Err(Error::IllConditioned { .. })));
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = ConstraintFactor::new(ok.clone(), &p).unwrap();
        assert!((f.condition() - 3.0).abs() < 1e-12);
        let id = &ok * f.inverse();
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
    }
}
