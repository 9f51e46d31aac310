//! Linear Schrödinger equation `p_t = −q_xx + m₀² q`, `q_t = p_xx − m₀² p` on
//! `(0, 2π]` with the canonical Gaussian prior, observed through `N` periodic
//! Gaussian kernels. Every quantity is a truncated Fourier sum, so the exact
//! conditioned evolution is available as a reference for the effective
//! equations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conditioning::{
    block_diagonal, ConstraintFactor, Field, GaussianMoments, Kernel, KernelRepr, KernelSet, SpectralCoeffs,
    SpectralPrior,
};
use crate::error::{invalid, Error, Result};
use crate::ode::{integrate, OdeProblem, Trajectory};
use crate::policy::NumericalPolicy;
use crate::seed;

/// Largest truncation order the automatic raise will try.
const MAX_K: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub m0: f64,
    /// Number of kernels per component.
    pub n_kernels: usize,
    /// Kernel width as a multiple of the mesh spacing `Δx = 2π/N`.
    pub sigma_frac: f64,
    /// Initial Fourier truncation order; raised when the tail is too large.
    pub k_max: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            m0: 1.0,
            n_kernels: 5,
            sigma_frac: 1.0,
            k_max: 512,
        }
    }
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return Err(invalid(format!("m0 must be positive, got {}", self.m0)));
        }
        if self.n_kernels == 0 {
            return Err(invalid("at least one kernel is required"));
        }
        if !(self.sigma_frac > 0.0 && self.sigma_frac.is_finite()) {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma_frac)));
        }
        if self.k_max < 8 {
            return Err(invalid(format!("Fourier truncation must be at least 8, got {}", self.k_max)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_kernels as f64
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_frac * self.spacing()
    }
}

/// Prior, kernels and the factorised constraint covariance for one choice of
/// kernels. `p` and `q` are independent with identical statistics, so every
/// matrix here is the `N × N` block shared by both components.
#[derive(Debug, Clone)]
pub struct LinearModel {
    m0: f64,
    sigma: Option<f64>,
    k_max: usize,
    centers: Vec<f64>,
    prior: SpectralPrior,
    kernels: KernelSet,
    factor: ConstraintFactor,
    gram: DMatrix<f64>,
    policy: NumericalPolicy,
}

/// Upper bound on `Σ_{|k|>K} e^{−k²σ²/2}/(k²+m₀²)` relative to the `k = 0`
/// term, the slowest-converging sum the model evaluates.
pub fn gaussian_tail_bound(m0: f64, sigma: f64, k_max: usize) -> f64 {
    let a = 0.5 * sigma * sigma;
    let k1 = k_max as f64 + 1.0;
    let ratio = (-a * (2.0 * k1 + 1.0)).exp();
    let first = (-a * k1 * k1).exp() / (k1 * k1 + m0 * m0);
    2.0 * first / (1.0 - ratio) * m0 * m0
}

/// Smallest `K ≥ k_start` whose Gaussian tail bound is below `tol`.
pub fn raise_truncation(m0: f64, sigma: f64, k_start: usize, tol: f64) -> Result<usize> {
    let mut k = k_start;
    while gaussian_tail_bound(m0, sigma, k) > tol {
        k *= 2;
        if k > MAX_K {
            return Err(invalid(format!(
                "kernel width {sigma} needs more than {MAX_K} Fourier modes"
            )));
        }
    }
    Ok(k)
}

/// `ĝ(k) = e^{−k²σ²/4} e^{−ikx_c} / 2π` for `|k| ≤ K`: a unit-mass periodic
/// Gaussian centred at `center`.
pub fn gaussian_kernel_coeffs(sigma: f64, center: f64, k_max: usize) -> SpectralCoeffs {
    let coeffs = (-(k_max as i64)..=k_max as i64)
        .map(|k| {
            let kf = k as f64;
            Complex64::from_polar((-0.25 * kf * kf * sigma * sigma).exp() / (2.0 * PI), -kf * center)
        })
        .collect();
    SpectralCoeffs::new(k_max, coeffs).expect("Gaussian coefficients are conjugate-symmetric")
}

/// `cos(mode·x)` or `sin(mode·x)`, padded to `k_max`.
pub fn trig_kernel_coeffs(mode: usize, sine: bool, k_max: usize) -> Result<SpectralCoeffs> {
    if mode > k_max {
        return Err(invalid(format!("mode {mode} exceeds truncation {k_max}")));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k_max + 1];
    let (plus, minus) = if sine {
        (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5))
    } else {
        (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0))
    };
    if mode == 0 {
        coeffs[k_max] = if sine { Complex64::new(0.0, 0.0) } else { Complex64::new(1.0, 0.0) };
    } else {
        coeffs[k_max + mode] = plus;
        coeffs[k_max - mode] = minus;
    }
    SpectralCoeffs::new(k_max, coeffs)
}

impl LinearModel {
    /// Gaussian kernels of width `σ = sigma_frac·Δx` centred at `x_α = 2πα/N`,
    /// `α = 1..N`.
    pub fn gaussian(params: &LinearParams) -> Result<Self> {
        Self::gaussian_with_policy(params, NumericalPolicy::default())
    }

    pub fn gaussian_with_policy(params: &LinearParams, policy: NumericalPolicy) -> Result<Self> {
        params.validate()?;
        let sigma = params.sigma();
        let k_max = raise_truncation(params.m0, sigma, params.k_max, policy.fourier_tail_rel)?;
        let centers: Vec<f64> = (1..=params.n_kernels).map(|a| a as f64 * params.spacing()).collect();
        let coeffs = centers
            .iter()
            .map(|&c| gaussian_kernel_coeffs(sigma, c, k_max))
            .collect();
        let mut model = Self::with_kernels(params.m0, k_max, coeffs, centers, policy)?;
        model.sigma = Some(sigma);
        Ok(model)
    }

    /// Arbitrary real kernels given by their Fourier coefficients. The
    /// truncation is widened to cover every kernel's band.
    pub fn with_kernels(
        m0: f64,
        k_max: usize,
        coeffs: Vec<SpectralCoeffs>,
        centers: Vec<f64>,
        policy: NumericalPolicy,
    ) -> Result<Self> {
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(invalid(format!("m0 must be positive, got {m0}")));
        }
        if coeffs.len() != centers.len() {
            return Err(Error::DimensionMismatch {
                what: "kernel centres",
                expected: coeffs.len(),
                found: centers.len(),
            });
        }
        let k_max = coeffs.iter().map(SpectralCoeffs::k_max).fold(k_max, usize::max);
        let spectrum = (0..=k_max).map(|k| 1.0 / (2.0 * PI * ((k * k) as f64 + m0 * m0))).collect();
        let prior = SpectralPrior::new(k_max, spectrum)?;
        let kernels = KernelSet::spectral(
            coeffs
                .into_iter()
                .zip(&centers)
                .map(|(c, &center)| Kernel {
                    component: 0,
                    center,
                    repr: KernelRepr::Spectral(c),
                })
                .collect(),
        )?;
        let factor = prior.factor(&kernels, &policy)?;
        let gram = gram_matrix(&kernels);
        Ok(Self {
            m0,
            sigma: None,
            k_max,
            centers,
            prior,
            kernels,
            factor,
            gram,
            policy,
        })
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn n_kernels(&self) -> usize {
        self.kernels.len()
    }

    /// Kernel width, for Gaussian kernels.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn prior(&self) -> &SpectralPrior {
        &self.prior
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn policy(&self) -> &NumericalPolicy {
        &self.policy
    }

    /// Constraint covariance `M` (shared by `p` and `q`).
    pub fn constraint_covariance(&self) -> &DMatrix<f64> {
        self.factor.matrix()
    }

    pub fn m_inverse(&self) -> &DMatrix<f64> {
        self.factor.inverse()
    }

    /// `⟨g_α, g_β⟩`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `ω(k) = k² + m₀²`.
    pub fn frequency(&self, k: i64) -> f64 {
        (k * k) as f64 + self.m0 * self.m0
    }

    fn coeffs(&self, alpha: usize) -> &SpectralCoeffs {
        match &self.kernels.get(alpha).repr {
            KernelRepr::Spectral(s) => s,
            KernelRepr::Grid(_) => unreachable!("linear model kernels are spectral"),
        }
    }

    fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != 2 * self.n_kernels() {
            return Err(Error::DimensionMismatch {
                what: "collective variable values (p then q)",
                expected: 2 * self.n_kernels(),
                found: values.len(),
            });
        }
        Ok(())
    }
}

fn gram_matrix(kernels: &KernelSet) -> DMatrix<f64> {
    let coeffs: Vec<&SpectralCoeffs> = kernels
        .iter()
        .map(|k| match &k.repr {
            KernelRepr::Spectral(s) => s,
            KernelRepr::Grid(_) => unreachable!(),
        })
        .collect();
    let n = coeffs.len();
    DMatrix::from_fn(n, n, |a, b| {
        let k_max = coeffs[a].k_max().min(coeffs[b].k_max()) as i64;
        2.0 * PI
            * (-k_max..=k_max)
                .map(|k| (coeffs[a].at(k).conj() * coeffs[b].at(k)).re)
                .sum::<f64>()
    })
}

/// Fourier coefficients of kernel `alpha` (zero-based).
pub fn kernel_fourier(model: &LinearModel, alpha: usize) -> Result<&SpectralCoeffs> {
    if alpha >= model.n_kernels() {
        return Err(invalid(format!("kernel index {alpha} out of range")));
    }
    Ok(model.coeffs(alpha))
}

/// Evaluation grid `x_j = 2πj/n`, `j = 0..n`.
pub fn evaluation_grid(n_eval: usize) -> Vec<f64> {
    (0..n_eval).map(|j| 2.0 * PI * j as f64 / n_eval as f64).collect()
}

/// The truncated prior covariance on an `n_eval`-point grid, `p` and `q`
/// blocks identical, cross block zero. The grid must resolve every retained
/// mode (`n_eval ≥ 2K+1`).
pub fn spectral_covariance(model: &LinearModel, n_eval: usize) -> Result<GaussianMoments> {
    let k = model.k_max();
    if n_eval < 2 * k + 1 {
        return Err(invalid(format!(
            "evaluation grid of {n_eval} points cannot resolve {k} Fourier modes (need {})",
            2 * k + 1
        )));
    }
    let h = 2.0 * PI / n_eval as f64;
    // Circulant: one row of separations suffices.
    let row: Vec<f64> = (0..n_eval).map(|j| model.prior.covariance_at(j as f64 * h)).collect();
    let block = crate::conditioning::circulant(&row);
    GaussianMoments::zero_mean(2, n_eval, h, block_diagonal(&block, 2), &model.policy)
}

/// Regression functions `c_α(x_j)` on the evaluation grid, one column per
/// kernel.
pub fn regression_functions(model: &LinearModel, n_eval: usize) -> DMatrix<f64> {
    let xs = evaluation_grid(n_eval);
    let n = model.n_kernels();
    let cross = DMatrix::from_fn(n_eval, n, |j, b| model.prior.cross_covariance(model.coeffs(b), xs[j]));
    cross * model.m_inverse()
}

/// Conditional means `⟨p(x)⟩_V`, `⟨q(x)⟩_V` on the evaluation grid as a
/// two-component field. `values` holds `V^p` followed by `V^q`.
pub fn optimal_interpolant(model: &LinearModel, values: &[f64], n_eval: usize) -> Result<Field> {
    model.check_values(values)?;
    if n_eval == 0 {
        return Err(invalid("evaluation grid must have at least one point"));
    }
    let n = model.n_kernels();
    let c = regression_functions(model, n_eval);
    let p = &c * DVector::from_column_slice(&values[..n]);
    let q = &c * DVector::from_column_slice(&values[n..]);
    Field::new(vec![p.as_slice().to_vec(), q.as_slice().to_vec()], 2.0 * PI / n_eval as f64)
}

/// `B = ⟨g, g⟩ M⁻¹`, the coupling in `dV^p/dt = B V^q`.
pub fn effective_coupling(model: &LinearModel) -> DMatrix<f64> {
    model.gram() * model.m_inverse()
}

/// Generator `[[0, B], [−B, 0]]` of the effective system on `(V^p, V^q)`.
pub fn effective_linear_rhs(model: &LinearModel) -> DMatrix<f64> {
    let b = effective_coupling(model);
    let n = model.n_kernels();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).copy_from(&b);
    j.view_mut((n, 0), (n, n)).copy_from(&(-b));
    j
}

/// Propagator sums `c^C(t)`, `c^S(t)` at one time.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    pub t: f64,
    pub cos_part: DMatrix<f64>,
    pub sin_part: DMatrix<f64>,
}

impl ExactPropagator {
    pub fn new(model: &LinearModel, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("time must be non-negative, got {t}")));
        }
        // (2π)² ĉ(k) = 2π/ω, so weighting the M sum by cos(ωt) and sin(ωt)
        // gives c^C and c^S.
        let cos_part = model
            .prior
            .weighted_matrix(&model.kernels, |k| (model.frequency(k) * t).cos())?;
        let sin_part = model
            .prior
            .weighted_matrix(&model.kernels, |k| (model.frequency(k) * t).sin())?;
        Ok(Self { t, cos_part, sin_part })
    }

    /// `⟨U^p(t)⟩ = c^C M⁻¹ V^p + c^S M⁻¹ V^q`, `⟨U^q(t)⟩ = c^C M⁻¹ V^q − c^S M⁻¹ V^p`.
    pub fn apply(&self, model: &LinearModel, values: &[f64]) -> Result<Vec<f64>> {
        model.check_values(values)?;
        let n = model.n_kernels();
        let wp = model.m_inverse() * DVector::from_column_slice(&values[..n]);
        let wq = model.m_inverse() * DVector::from_column_slice(&values[n..]);
        let up = &self.cos_part * &wp + &self.sin_part * &wq;
        let uq = &self.cos_part * &wq - &self.sin_part * &wp;
        Ok(up.iter().chain(uq.iter()).copied().collect())
    }
}

/// Exact conditional means of all `2N` collective variables at time `t`.
pub fn exact_evolution(model: &LinearModel, values: &[f64], t: f64) -> Result<Vec<f64>> {
    ExactPropagator::new(model, t)?.apply(model, values)
}

/// RK4 solution of the effective system.
pub fn effective_trajectory(
    model: &LinearModel,
    values: &[f64],
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    model.check_values(values)?;
    let j = effective_linear_rhs(model);
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        for (r, out) in dy.iter_mut().enumerate() {
            *out = (0..y.len()).map(|c| j[(r, c)] * y[c]).sum();
        }
    };
    integrate(&OdeProblem {
        rhs,
        y0: values.to_vec(),
        t_end,
        dt,
        record_every,
    })
}

/// Fourier modes `z_k`, `k = 0..=K`, of one prior sample of a single
/// component: `u(x) = Σ_{|k|≤K} z_k e^{ikx}` with `z_{−k} = conj z_k` and
/// `E|z_k|² = ĉ(k)`.
pub fn sample_prior_modes<R: Rng + ?Sized>(model: &LinearModel, rng: &mut R) -> Vec<Complex64> {
    (0..=model.k_max())
        .map(|k| {
            let c = model.prior.density(k as i64);
            if k == 0 {
                let z: f64 = rng.sample(StandardNormal);
                Complex64::new(c.sqrt() * z, 0.0)
            } else {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                Complex64::new(a, b) * (0.5 * c).sqrt()
            }
        })
        .collect()
}

/// `U_α = ∫ g_α u = 2π Σ_k conj(ĝ_α(k)) z_k` for one component.
pub fn collective_from_modes(model: &LinearModel, modes: &[Complex64]) -> Vec<f64> {
    (0..model.n_kernels())
        .map(|a| {
            let g = model.coeffs(a);
            let mut acc = (g.at(0).conj() * modes[0]).re;
            for (k, z) in modes.iter().enumerate().skip(1) {
                acc += 2.0 * (g.at(k as i64).conj() * z).re;
            }
            2.0 * PI * acc
        })
        .collect()
}

/// Seeded demo data: collective variables of one prior sample (`V^p` then `V^q`).
pub fn random_values(model: &LinearModel, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let p = sample_prior_modes(model, &mut rng);
    let q = sample_prior_modes(model, &mut rng);
    let mut v = collective_from_modes(model, &p);
    v.extend(collective_from_modes(model, &q));
    v
}

pub fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64).sqrt()
}

/// Effective and exact `⟨U⟩` side by side on a uniform output grid.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub exact: Vec<Vec<f64>>,
    pub effective: Vec<Vec<f64>>,
}

impl Comparison {
    /// Largest `|effective − exact|` of variable `index` over the record.
    pub fn max_error(&self, index: usize) -> f64 {
        self.exact
            .iter()
            .zip(&self.effective)
            .map(|(e, a)| (e[index] - a[index]).abs())
            .fold(0.0, f64::max)
    }

    /// First recorded time at which variable `index` deviates by more than
    /// `threshold`.
    pub fn deviation_time(&self, index: usize, threshold: f64) -> Option<f64> {
        self.exact
            .iter()
            .zip(&self.effective)
            .zip(&self.times)
            .find(|((e, a), _)| (e[index] - a[index]).abs() > threshold)
            .map(|(_, &t)| t)
    }
}

/// Integrates the effective system with step `dt` and evaluates the exact
/// solution every `record_every` steps.
pub fn compare(model: &LinearModel, values: &[f64], t_end: f64, dt: f64, record_every: usize) -> Result<Comparison> {
    let traj = effective_trajectory(model, values, t_end, dt, record_every)?;
    let exact = traj
        .times
        .iter()
        .map(|&t| exact_evolution(model, values, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        times: traj.times,
        exact,
        effective: traj.states,
    })
}
