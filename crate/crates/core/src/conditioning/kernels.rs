use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::Field;
use crate::error::{invalid, Error, Result};
use crate::policy::NumericalPolicy;

/// Fourier coefficients `ĝ(k)` for `|k| <= k_max` of a real periodic kernel on
/// `(0, 2π]`, so that `g(x) = Σ_k ĝ(k) e^{ikx}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn new(k_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * k_max + 1 {
            return Err(Error::DimensionMismatch {
                what: "spectral kernel coefficients",
                expected: 2 * k_max + 1,
                found: coeffs.len(),
            });
        }
        let out = Self { k_max, coeffs };
        let scale = out.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for k in 0..=k_max as i64 {
            let d = (out.at(k) - out.at(-k).conj()).norm();
            if d > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(invalid(format!(
                    "kernel coefficients are not conjugate-symmetric at k = {k}"
                )));
            }
        }
        Ok(out)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Coefficient of mode `k`; zero outside the stored band.
    pub fn at(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.k_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.k_max as i64) as usize]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let k_max = self.k_max as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as i64 - k_max, *c))
    }

    /// Evaluates the (real) kernel at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.at(0).re;
        for k in 1..=self.k_max as i64 {
            // ĝ(k) e^{ikx} + conj(...)
            acc += 2.0 * (self.at(k) * Complex64::from_polar(1.0, k as f64 * x)).re;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelRepr {
    /// Quadrature weights on the grid: `U = Σ_j w(j) u(j)`.
    Grid(Vec<f64>),
    /// Continuous kernel on `(0, 2π]`: `U = ∫ g(x) u(x) dx`.
    Spectral(SpectralCoeffs),
}

/// One collective variable: a linear functional acting on one component.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub component: usize,
    pub center: f64,
    pub repr: KernelRepr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    kernels: Vec<Kernel>,
}

impl KernelSet {
    /// Grid-mode kernels. Each weight vector must sum to one.
    pub fn grid(kernels: Vec<Kernel>, policy: &NumericalPolicy) -> Result<Self> {
        let set = Self::unchecked(kernels)?;
        let n = set.grid_len()?;
        for (a, k) in set.kernels.iter().enumerate() {
            let KernelRepr::Grid(w) = &k.repr else {
                return Err(invalid("grid kernel set contains a spectral kernel"));
            };
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "kernel weight length",
                    expected: n,
                    found: w.len(),
                });
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > policy.kernel_sum_tol {
                return Err(invalid(format!("kernel {a} weights sum to {sum}, expected 1")));
            }
        }
        Ok(set)
    }

    /// Grid kernels without the unit-sum check, for functionals that are not
    /// local averages (unit vectors in tests, arbitrary constraint rows).
    pub fn grid_unnormalized(kernels: Vec<Kernel>) -> Result<Self> {
        let set = Self::unchecked(kernels)?;
        let n = set.grid_len()?;
        if set
            .kernels
            .iter()
            .any(|k| !matches!(&k.repr, KernelRepr::Grid(w) if w.len() == n))
        {
            return Err(invalid("grid kernels must all have the same length"));
        }
        Ok(set)
    }

    pub fn spectral(kernels: Vec<Kernel>) -> Result<Self> {
        let set = Self::unchecked(kernels)?;
        if set
            .kernels
            .iter()
            .any(|k| !matches!(k.repr, KernelRepr::Spectral(_)))
        {
            return Err(invalid("spectral kernel set contains a grid kernel"));
        }
        Ok(set)
    }

    fn unchecked(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("at least one kernel is required"));
        }
        Ok(Self { kernels })
    }

    fn grid_len(&self) -> Result<usize> {
        match &self.kernels[0].repr {
            KernelRepr::Grid(w) if !w.is_empty() => Ok(w.len()),
            KernelRepr::Grid(_) => Err(invalid("empty kernel weights")),
            KernelRepr::Spectral(_) => Err(invalid("expected grid kernels")),
        }
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Kernel> {
        self.kernels.iter()
    }

    pub fn get(&self, a: usize) -> &Kernel {
        &self.kernels[a]
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kernels[0].repr, KernelRepr::Grid(_))
    }

    /// Number of grid points the kernels act on (grid mode only).
    pub fn n(&self) -> Option<usize> {
        self.grid_len().ok()
    }

    pub fn max_component(&self) -> usize {
        self.kernels.iter().map(|k| k.component).max().unwrap_or(0)
    }

    /// The `N × (d·n)` matrix whose rows are the functionals on the flat
    /// component-major state.
    pub fn matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        let n = self.grid_len()?;
        let mut g = DMatrix::zeros(self.len(), d * n);
        for (a, k) in self.kernels.iter().enumerate() {
            if k.component >= d {
                return Err(Error::DimensionMismatch {
                    what: "kernel component",
                    expected: d,
                    found: k.component + 1,
                });
            }
            let KernelRepr::Grid(w) = &k.repr else {
                return Err(invalid("expected grid kernels"));
            };
            for (j, &wj) in w.iter().enumerate() {
                g[(a, k.component * n + j)] = wj;
            }
        }
        Ok(g)
    }

    /// Collective variables of a field.
    pub fn apply(&self, field: &Field) -> Result<DVector<f64>> {
        let g = self.matrix(field.d())?;
        if g.ncols() != field.d() * field.n() {
            return Err(Error::DimensionMismatch {
                what: "field size",
                expected: g.ncols(),
                found: field.d() * field.n(),
            });
        }
        Ok(g * field.flatten())
    }

    /// Samples spectral kernels onto an `n`-point grid of `(0, 2π]` as
    /// trapezoid weights `g(x_j) Δx`.
    pub fn to_grid(&self, n: usize) -> Result<Self> {
        let dx = 2.0 * PI / n as f64;
        let kernels = self
            .kernels
            .iter()
            .map(|k| match &k.repr {
                KernelRepr::Spectral(s) => Ok(Kernel {
                    component: k.component,
                    center: k.center,
                    repr: KernelRepr::Grid((0..n).map(|j| s.eval(j as f64 * dx) * dx).collect()),
                }),
                KernelRepr::Grid(_) => Err(invalid("kernel is already on a grid")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::grid_unnormalized(kernels)
    }
}

impl<'a> IntoIterator for &'a KernelSet {
    type Item = &'a Kernel;
    type IntoIter = std::slice::Iter<'a, Kernel>;
    fn into_iter(self) -> Self::IntoIter {
        self.kernels.iter()
    }
}

/// Unit-vector functional picking `site` of `component`.
pub fn delta_kernel(n: usize, component: usize, site: usize) -> Kernel {
    let mut w = vec![0.0; n];
    w[site] = 1.0;
    Kernel {
        component,
        center: site as f64,
        repr: KernelRepr::Grid(w),
    }
}
