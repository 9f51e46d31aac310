//! Periodic Hamiltonian lattice
//!
//! `H = ½ Σ_j [((p(j+1)−p(j))/Δx)² + ((q(j+1)−q(j))/Δx)² + a(p²+q²) + ½b(p⁴+q⁴)]`
//!
//! with `dp/dt = ∂H/∂q`, `dq/dt = −∂H/∂p`. The defaults `a = 0`, `b = 1` give
//! the discretised nonlinear Schrödinger system; `b = 0`, `a > 0` is a
//! Gaussian model with a closed-form canonical covariance.

mod effective;
mod ensemble;
mod profile;

pub use effective::{effective_nonlinear_rhs, CubicPolynomial, EffectiveSystem};
pub use ensemble::{ensemble_oracle, stability_bound, EnsembleConfig, TrajectoryStats};
pub use profile::{
    estimate_covariance, gaussianized_prior, parse_profile_csv, write_profile_csv, CovarianceProfile, ProfileChain,
};

use serde::{Deserialize, Serialize};

use crate::conditioning::{Field, Kernel, KernelRepr, KernelSet};
use crate::error::{invalid, Error, Result};
use crate::mcmc::{run_chain_with, ChainConfig, TargetDensity};
use crate::policy::NumericalPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeParams {
    pub n: usize,
    pub n_kernels: usize,
    /// Kernel width as a fraction of the domain length.
    pub sigma: f64,
    /// Zero-based kernel centre sites; evenly spaced when empty.
    pub centers: Vec<usize>,
    /// Onsite quadratic coefficient `a`.
    pub quadratic: f64,
    /// Onsite quartic coefficient `b`.
    pub quartic: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            n: 16,
            n_kernels: 2,
            sigma: 0.25,
            centers: Vec::new(),
            quadratic: 0.0,
            quartic: 1.0,
        }
    }
}

/// Periodic index distance.
pub fn periodic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    params: LatticeParams,
    centers: Vec<usize>,
    dx: f64,
    // One normalised weight vector per kernel.
    weights: Vec<Vec<f64>>,
}

impl LatticeModel {
    pub fn new(params: LatticeParams) -> Result<Self> {
        let n = params.n;
        if n < 4 {
            return Err(invalid(format!("lattice needs at least 4 sites, got {n}")));
        }
        if params.n_kernels == 0 || params.n_kernels >= n {
            return Err(invalid(format!(
                "kernel count must lie in 1..{n}, got {}",
                params.n_kernels
            )));
        }
        if !(params.sigma > 0.0 && params.sigma.is_finite()) {
            return Err(invalid(format!("kernel width must be positive, got {}", params.sigma)));
        }
        if !(params.quadratic >= 0.0 && params.quartic >= 0.0) || params.quadratic + params.quartic == 0.0 {
            return Err(invalid("onsite potential must be confining (a >= 0, b >= 0, not both zero)"));
        }
        let centers = if params.centers.is_empty() {
            (0..params.n_kernels).map(|a| a * n / params.n_kernels).collect()
        } else {
            params.centers.clone()
        };
        if centers.len() != params.n_kernels {
            return Err(Error::DimensionMismatch {
                what: "kernel centres",
                expected: params.n_kernels,
                found: centers.len(),
            });
        }
        if let Some(c) = centers.iter().find(|&&c| c >= n) {
            return Err(invalid(format!("kernel centre {c} outside the lattice")));
        }
        let width2 = (n as f64 * params.sigma).powi(2);
        let weights = centers
            .iter()
            .map(|&c| {
                let raw: Vec<f64> = (0..n)
                    .map(|j| (-(periodic_distance(c, j, n).pow(2) as f64) / width2).exp())
                    .collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / z).collect()
            })
            .collect();
        Ok(Self {
            dx: 1.0 / n as f64,
            params,
            centers,
            weights,
        })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn n_kernels(&self) -> usize {
        self.params.n_kernels
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn kernel_weights(&self, alpha: usize) -> &[f64] {
        &self.weights[alpha]
    }

    /// `2N` grid kernels: the `N` p-variables then the `N` q-variables.
    pub fn kernel_set(&self, policy: &NumericalPolicy) -> Result<KernelSet> {
        let mut kernels = Vec::with_capacity(2 * self.n_kernels());
        for component in 0..2 {
            for (w, &c) in self.weights.iter().zip(&self.centers) {
                kernels.push(Kernel {
                    component,
                    center: c as f64,
                    repr: KernelRepr::Grid(w.clone()),
                });
            }
        }
        KernelSet::grid(kernels, policy)
    }

    /// Collective variables `(U^p, U^q)` of a flat state `[p, q]`.
    pub fn collective(&self, state: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * self.n_kernels());
        for component in 0..2 {
            let x = &state[component * n..(component + 1) * n];
            for w in &self.weights {
                out.push(w.iter().zip(x).map(|(a, b)| a * b).sum());
            }
        }
        out
    }

    fn onsite(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * self.params.quadratic * x2 + 0.25 * self.params.quartic * x2 * x2
    }

    fn onsite_force(&self, x: f64) -> f64 {
        self.params.quadratic * x + self.params.quartic * x * x * x
    }

    /// Energy of a flat state `[p, q]`.
    pub fn hamiltonian_flat(&self, state: &[f64]) -> f64 {
        let n = self.n();
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let mut h = 0.0;
        for component in 0..2 {
            let x = &state[component * n..(component + 1) * n];
            for j in 0..n {
                let d = x[(j + 1) % n] - x[j];
                h += 0.5 * d * d * inv_dx2 + self.onsite(x[j]);
            }
        }
        h
    }

    /// `dp/dt = −Δq/Δx² + a q + b q³`, `dq/dt = Δp/Δx² − a p − b p³` on a flat
    /// state.
    pub fn fine_rhs_flat(&self, state: &[f64], out: &mut [f64]) {
        let n = self.n();
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let (p, q) = state.split_at(n);
        let (dp, dq) = out.split_at_mut(n);
        for j in 0..n {
            let (l, r) = ((j + n - 1) % n, (j + 1) % n);
            let lap_q = q[l] - 2.0 * q[j] + q[r];
            let lap_p = p[l] - 2.0 * p[j] + p[r];
            dp[j] = -lap_q * inv_dx2 + self.onsite_force(q[j]);
            dq[j] = lap_p * inv_dx2 - self.onsite_force(p[j]);
        }
    }

    fn check_field(&self, state: &Field) -> Result<()> {
        if state.d() != 2 || state.n() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "lattice state (2 components of n sites)",
                expected: 2 * self.n(),
                found: state.d() * state.n(),
            });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, state: &Field) -> Result<f64> {
        self.check_field(state)?;
        Ok(self.hamiltonian_flat(state.flatten().as_slice()))
    }

    pub fn fine_rhs(&self, state: &Field) -> Result<Field> {
        self.check_field(state)?;
        let flat = state.flatten();
        let mut out = vec![0.0; flat.len()];
        self.fine_rhs_flat(flat.as_slice(), &mut out);
        Field::from_flat(&out, 2, self.dx)
    }
}

/// One state drawn from the canonical density by a single-site chain run for
/// `sweeps` sweeps from the zero state.
pub fn canonical_state(model: &LatticeModel, sweeps: usize, seed: u64) -> Result<Vec<f64>> {
    let config = ChainConfig {
        samples: 1,
        burn_in: sweeps,
        thin: 1,
        proposal_width: 0.1,
        adapt: true,
        target_acceptance: 0.5,
        seed,
    };
    let mut last = Vec::new();
    run_chain_with(model, &vec![0.0; 2 * model.n()], &config, |x| last = x.to_vec())?;
    Ok(last)
}

/// Seeded initial data: the collective variables of one canonical state.
pub fn random_values(model: &LatticeModel, sweeps: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(model.collective(&canonical_state(model, sweeps, seed)?))
}

/// The canonical density `exp(−H)` on flat states `[p, q]`.
impl TargetDensity for LatticeModel {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn neg_log_density(&self, x: &[f64]) -> f64 {
        self.hamiltonian_flat(x)
    }

    fn single_site_delta(&self, x: &[f64], i: usize, new: f64) -> f64 {
        let n = self.n();
        let base = i / n * n;
        let j = i % n;
        let left = x[base + (j + n - 1) % n];
        let right = x[base + (j + 1) % n];
        let old = x[i];
        let bonds = |v: f64| (v - left).powi(2) + (right - v).powi(2);
        0.5 * (bonds(new) - bonds(old)) / (self.dx * self.dx) + self.onsite(new) - self.onsite(old)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn model() -> LatticeModel {
        LatticeModel::new(LatticeParams::default()).unwrap()
    }

    fn random_state(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..2 * n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn default_kernels_match_the_published_layout() {
        let m = model();
        assert_eq!(m.centers(), &[0, 8]);
        for a in 0..2 {
            let w = m.kernel_weights(a);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            // exp(−d²/(n²σ²)) with n²σ² = 16.
            let c = m.centers()[a];
            assert!((w[(c + 3) % 16] / w[c] - (-9.0f64 / 16.0).exp()).abs() < 1e-14);
        }
        assert_eq!(periodic_distance(1, 15, 16), 2);
        assert_eq!(periodic_distance(0, 8, 16), 8);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = |p: LatticeParams| LatticeModel::new(p).is_err();
        assert!(bad(LatticeParams { n: 3, ..Default::default() }));
        assert!(bad(LatticeParams { n_kernels: 16, ..Default::default() }));
        assert!(bad(LatticeParams { sigma: 0.0, ..Default::default() }));
        assert!(bad(LatticeParams { centers: vec![0, 16], ..Default::default() }));
        assert!(bad(LatticeParams { quartic: 0.0, ..Default::default() }));
    }

    #[test]
    fn fixed_points_and_constant_states() {
        let m = model();
        let mut out = vec![1.0; 32];
        m.fine_rhs_flat(&[0.0; 32], &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
        let (a, b) = (0.7, -0.4);
        let mut state = vec![a; 16];
        state.extend(vec![b; 16]);
        m.fine_rhs_flat(&state, &mut out);
        assert!(out[..16].iter().all(|&v| (v - b * b * b).abs() < 1e-15));
        assert!(out[16..].iter().all(|&v| (v + a * a * a).abs() < 1e-15));
    }

    #[test]
    fn hamiltonian_examples_and_symmetries() {
        let m = model();
        assert_eq!(m.hamiltonian_flat(&[0.0; 32]), 0.0);
        let a = 0.9f64;
        let mut s = vec![a; 16];
        s.extend(vec![0.0; 16]);
        assert!((m.hamiltonian_flat(&s) - 16.0 * a.powi(4) / 4.0).abs() < 1e-12);
        for seed in 0..10 {
            let x = random_state(seed, 16);
            let h = m.hamiltonian_flat(&x);
            let mut rot = vec![0.0; 32];
            for c in 0..2 {
                for j in 0..16 {
                    rot[c * 16 + (j + 1) % 16] = x[c * 16 + j];
                }
            }
            let mut swapped = x[16..].to_vec();
            swapped.extend_from_slice(&x[..16]);
            assert!((m.hamiltonian_flat(&rot) - h).abs() < 1e-12 * h);
            assert!((m.hamiltonian_flat(&swapped) - h).abs() < 1e-12 * h);
        }
    }

    #[test]
    fn rhs_is_the_symplectic_gradient() {
        let m = LatticeModel::new(LatticeParams {
            quadratic: 0.3,
            ..Default::default()
        })
        .unwrap();
        for seed in 0..5 {
            let x = random_state(seed, 16);
            let mut f = vec![0.0; 32];
            m.fine_rhs_flat(&x, &mut f);
            let h = 1e-6;
            for i in 0..32 {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[i] += h;
                b[i] -= h;
                let grad = (m.hamiltonian_flat(&a) - m.hamiltonian_flat(&b)) / (2.0 * h);
                // p-rows take +∂H/∂q, q-rows take −∂H/∂p.
                let expected = if i < 16 { -f[i + 16] } else { f[i - 16] };
                assert!(
                    (grad - expected).abs() < 1e-6 * expected.abs().max(1.0),
                    "coordinate {i}: {grad} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn single_site_delta_matches_full_difference() {
        let m = model();
        let x = random_state(3, 16);
        for i in [0, 7, 15, 16, 31] {
            let mut y = x.clone();
            y[i] += 0.37;
            let full = m.hamiltonian_flat(&y) - m.hamiltonian_flat(&x);
            assert!((m.single_site_delta(&x, i, y[i]) - full).abs() < 1e-10 * full.abs().max(1.0));
        }
    }

    #[test]
    fn field_interface_validates_shape() {
        let m = model();
        let bad = Field::zeros(2, 8, 0.125).unwrap();
        assert!(m.fine_rhs(&bad).is_err());
        let good = Field::zeros(2, 16, m.dx()).unwrap();
        assert_eq!(m.hamiltonian(&good).unwrap(), 0.0);
        assert_eq!(m.collective(&[1.0; 32]).len(), 4);
    }
}
