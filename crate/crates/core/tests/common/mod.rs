//! Oracles shared by the integration suites. They use only `nalgebra` and
//! `rand`, never the library's conditioning code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Exact i.i.d. draws from `N(mean, cov)` restricted to `G u = V`.
///
/// Works in coordinates `u = u0 + B w` on the affine subspace, where the
/// density is Gaussian in `w` with precision `Bᵀ C⁻¹ B` (precision form, as
/// opposed to the covariance-form regression used by the library).
pub struct SubspaceSampler {
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
    chol_inv_t: DMatrix<f64>,
}

impl SubspaceSampler {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, g: &DMatrix<f64>, v: &DVector<f64>) -> Self {
        let m = g.ncols();
        let gram = g.transpose() * g;
        let eig = SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.amax();
        let null: Vec<DVector<f64>> = (0..m)
            .filter(|&i| eig.eigenvalues[i] < 1e-12 * scale)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let basis = DMatrix::from_columns(&null);
        // Minimum-norm point of the subspace.
        let u0 = g.transpose() * (g * g.transpose()).cholesky().unwrap().solve(v);
        let precision = cov.clone().cholesky().unwrap().inverse();
        let a = basis.transpose() * &precision * &basis;
        let a_chol = a.clone().cholesky().unwrap();
        // Stationary point of (u0 + Bw − μ)ᵀ P (u0 + Bw − μ).
        let w_star = -a_chol.solve(&(basis.transpose() * &precision * (&u0 - mean)));
        let l = a_chol.l();
        let chol_inv_t = l.transpose().try_inverse().unwrap();
        Self {
            offset: &u0 + &basis * w_star,
            basis,
            chol_inv_t,
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let s = &self.basis * &self.chol_inv_t;
        &s * s.transpose()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = normals(rng, self.chol_inv_t.ncols());
        &self.offset + &self.basis * (&self.chol_inv_t * z)
    }
}

/// Unconstrained `N(mean, cov)` draws through an independent Cholesky factor.
pub struct DirectSampler {
    mean: DVector<f64>,
    l: DMatrix<f64>,
}

impl DirectSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Self {
        Self {
            mean,
            l: cov.clone().cholesky().unwrap().l(),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        &self.mean + &self.l * normals(rng, self.l.ncols())
    }
}

/// Mean and standard error of i.i.d. observations.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn circulant(c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    DMatrix::from_fn(n, n, |i, j| c[(j + n - i) % n])
}

/// `c(r) = ⟨x(0) x(r)⟩` of the periodic chain with density
/// `∝ exp(−Σ_j [(x(j+1)−x(j))²/(2h²) + a x²/2 + b x⁴/4])` by the transfer
/// operator on a uniform quadrature grid of `points` nodes over
/// `[−half_width, half_width]`.
pub fn transfer_matrix_covariance(n: usize, h: f64, a: f64, b: f64, half_width: f64, points: usize) -> Vec<f64> {
    let dx = 2.0 * half_width / (points - 1) as f64;
    let x: Vec<f64> = (0..points).map(|i| -half_width + i as f64 * dx).collect();
    let onsite = |y: f64| 0.5 * a * y * y + 0.25 * b * y.powi(4);
    let t = DMatrix::from_fn(points, points, |i, j| {
        let d = x[i] - x[j];
        dx * (-(d * d) / (2.0 * h * h) - 0.5 * onsite(x[i]) - 0.5 * onsite(x[j])).exp()
    });
    let eig = SymmetricEigen::new(t);
    let lmax = eig.eigenvalues.amax();
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|l| l / lmax).collect();
    let q = &eig.eigenvectors;
    let xd = DMatrix::from_diagonal(&DVector::from_vec(x));
    let xm = q.transpose() * xd * q;
    let z: f64 = lam.iter().map(|l| l.powi(n as i32)).sum();
    (0..n)
        .map(|r| {
            let mut acc = 0.0;
            for i in 0..points {
                for j in 0..points {
                    acc += lam[i].powi(r as i32) * lam[j].powi((n - r) as i32) * xm[(i, j)].powi(2);
                }
            }
            acc / z
        })
        .collect()
}

/// `c(r)` of the Gaussian lattice: first row of `(−L/h² + a)⁻¹` with the
/// periodic second-difference `L`.
pub fn helmholtz_covariance(n: usize, h: f64, a: f64) -> Vec<f64> {
    let op = DMatrix::from_fn(n, n, |i, j| {
        let d = (i + n - j) % n;
        match d {
            0 => 2.0 / (h * h) + a,
            1 => -1.0 / (h * h),
            _ if d == n - 1 => -1.0 / (h * h),
            _ => 0.0,
        }
    });
    let inv = op.cholesky().unwrap().inverse();
    (0..n).map(|r| inv[(0, r)]).collect()
}
