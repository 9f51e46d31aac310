use nalgebra::{DMatrix, DVector};

/// A density known up to normalisation through its negative logarithm.
pub trait TargetDensity {
    fn dim(&self) -> usize;

    fn neg_log_density(&self, x: &[f64]) -> f64;

    /// Change in negative log-density when coordinate `i` of `x` is replaced by
    /// `new`. Override when the change is cheaper to compute locally.
    fn single_site_delta(&self, x: &[f64], i: usize, new: f64) -> f64 {
        let mut y = x.to_vec();
        y[i] = new;
        self.neg_log_density(&y) - self.neg_log_density(x)
    }

    /// Relative proposal scale per coordinate.
    fn scale_hints(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn neg_log_density(&self, x: &[f64]) -> f64 {
        (**self).neg_log_density(x)
    }
    fn single_site_delta(&self, x: &[f64], i: usize, new: f64) -> f64 {
        (**self).single_site_delta(x, i, new)
    }
    fn scale_hints(&self) -> Option<Vec<f64>> {
        (**self).scale_hints()
    }
}

/// Uniform density on `R^dim`.
#[derive(Debug, Clone, Copy)]
pub struct Flat {
    pub dim: usize,
}

impl TargetDensity for Flat {
    fn dim(&self) -> usize {
        self.dim
    }
    fn neg_log_density(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn single_site_delta(&self, _x: &[f64], _i: usize, _new: f64) -> f64 {
        0.0
    }
}

/// Gaussian with mean `mean` and precision matrix `precision`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Self {
        Self { mean, precision }
    }

    /// From a covariance matrix (must be invertible).
    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Option<Self> {
        cov.clone().cholesky().map(|c| Self::new(mean, c.inverse()))
    }
}

impl TargetDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn neg_log_density(&self, x: &[f64]) -> f64 {
        let r = DVector::from_column_slice(x) - &self.mean;
        0.5 * r.dot(&(&self.precision * &r))
    }

    fn single_site_delta(&self, x: &[f64], i: usize, new: f64) -> f64 {
        let d = new - x[i];
        let row = self.precision.row(i);
        let grad: f64 = (0..x.len()).map(|j| row[j] * (x[j] - self.mean[j])).sum();
        d * grad + 0.5 * self.precision[(i, i)] * d * d
    }
}

/// One-dimensional `exp(-x⁴/4)`.
#[derive(Debug, Clone, Copy)]
pub struct Quartic1d;

impl TargetDensity for Quartic1d {
    fn dim(&self) -> usize {
        1
    }
    fn neg_log_density(&self, x: &[f64]) -> f64 {
        0.25 * x[0].powi(4)
    }
}
