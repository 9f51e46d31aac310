use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::chain::{burn_in, run_chain_with, ChainConfig, ChainDiagnostics, ChainRun, SampleSet};
use super::TargetDensity;
use crate::error::{Error, Result};
use crate::policy::NumericalPolicy;
use crate::seed;

/// Steps between exact re-projections onto the constraint surface.
const REPROJECT_EVERY: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintMode {
    /// Exact constraints: the chain moves inside the affine subspace `G u = V`.
    Projection,
    /// Narrow-Gaussian relaxation `Π_α exp(-(U_α − V_α)² / Δ²)`.
    Penalty { delta: f64 },
}

impl ConstraintMode {
    pub const DEFAULT_PENALTY_DELTA: f64 = 0.05;
}

/// Linear equality constraints `G u = V` on an `m`-dimensional state.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    g: DMatrix<f64>,
    values: DVector<f64>,
    mode: ConstraintMode,
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    null_basis: DMatrix<f64>,
}

impl ConstraintSystem {
    pub fn new(g: DMatrix<f64>, values: DVector<f64>, mode: ConstraintMode, policy: &NumericalPolicy) -> Result<Self> {
        let (rows, m) = g.shape();
        if values.len() != rows {
            return Err(Error::DimensionMismatch {
                what: "constraint values",
                expected: rows,
                found: values.len(),
            });
        }
        if rows == 0 || rows > m {
            return Err(Error::DegenerateConstraints { rank: rows.min(m), rows });
        }
        if let ConstraintMode::Penalty { delta } = mode {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidInput(format!("penalty width must be positive, got {delta}")));
            }
        }
        let sv = g.clone().svd(false, false).singular_values;
        let max = sv.max();
        let rank = sv.iter().filter(|&&s| s > policy.rank_rel_tol * max).count();
        if rank < rows {
            return Err(Error::DegenerateConstraints { rank, rows });
        }
        let gram = (&g * g.transpose())
            .cholesky()
            .ok_or(Error::DegenerateConstraints { rank, rows })?;
        let null_basis = null_space_basis(&g);
        Ok(Self {
            g,
            values,
            mode,
            gram,
            null_basis,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    /// Orthonormal columns spanning `{u : G u = 0}`.
    pub fn null_basis(&self) -> &DMatrix<f64> {
        &self.null_basis
    }

    /// Orthogonal projection onto the affine subspace `G u = V`.
    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        let r = &self.g * u - &self.values;
        u - self.g.transpose() * self.gram.solve(&r)
    }

    pub fn residual(&self, u: &[f64]) -> f64 {
        (&self.g * DVector::from_column_slice(u) - &self.values).amax()
    }
}

/// Minimum-norm solution of `G u = V`, refined once against its residual.
pub fn feasible_point(constraints: &ConstraintSystem) -> DVector<f64> {
    let zero = DVector::zeros(constraints.dim());
    let u = constraints.project(&zero);
    constraints.project(&u)
}

/// Modified Gram–Schmidt: orthonormalise the rows of `G`, then sweep the
/// standard basis against them (twice, for re-orthogonalisation) and keep the
/// `m − N` directions with the largest remainders.
fn null_space_basis(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, m) = g.shape();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let orthogonalise = |v: &mut DVector<f64>, against: &[DVector<f64>]| {
        for _ in 0..2 {
            for b in against {
                let c = b.dot(v);
                v.axpy(-c, b, 1.0);
            }
        }
    };
    for r in 0..rows {
        let mut v = g.row(r).transpose();
        orthogonalise(&mut v, &basis);
        let norm = v.norm();
        v /= norm;
        basis.push(v);
    }
    let mut null = Vec::with_capacity(m - rows);
    let mut candidates: Vec<usize> = (0..m).collect();
    while null.len() < m - rows {
        // Pick the standard basis vector with the largest component left
        // after projecting out everything accepted so far.
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (pos, &i) in candidates.iter().enumerate() {
            let mut v = DVector::zeros(m);
            v[i] = 1.0;
            orthogonalise(&mut v, &basis);
            let n = v.norm();
            if best.as_ref().map_or(true, |b| n > b.2) {
                best = Some((pos, v, n));
            }
        }
        let (pos, mut v, n) = best.expect("null space dimension is m - rank");
        candidates.remove(pos);
        v /= n;
        basis.push(v.clone());
        null.push(v);
    }
    if null.is_empty() {
        return DMatrix::zeros(m, 0);
    }
    DMatrix::from_columns(&null)
}

/// Negative log-density plus the narrow-Gaussian constraint penalty.
pub struct PenalizedTarget<'a, T> {
    inner: T,
    constraints: &'a ConstraintSystem,
    inv_delta2: f64,
}

impl<'a, T: TargetDensity> PenalizedTarget<'a, T> {
    pub fn new(inner: T, constraints: &'a ConstraintSystem, delta: f64) -> Self {
        Self {
            inner,
            constraints,
            inv_delta2: 1.0 / (delta * delta),
        }
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        let r = self.constraints.matrix() * DVector::from_column_slice(x) - self.constraints.values();
        r.norm_squared() * self.inv_delta2
    }
}

impl<T: TargetDensity> TargetDensity for PenalizedTarget<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn neg_log_density(&self, x: &[f64]) -> f64 {
        self.inner.neg_log_density(x) + self.penalty(x)
    }

    fn single_site_delta(&self, x: &[f64], i: usize, new: f64) -> f64 {
        let g = self.constraints.matrix();
        let d = new - x[i];
        let r = g * DVector::from_column_slice(x) - self.constraints.values();
        let col = g.column(i);
        // |r + d g_i|² − |r|²
        let dp = (2.0 * d * col.dot(&r) + d * d * col.norm_squared()) * self.inv_delta2;
        self.inner.single_site_delta(x, i, new) + dp
    }

    fn scale_hints(&self) -> Option<Vec<f64>> {
        self.inner.scale_hints()
    }
}

/// Random-walk Metropolis restricted to the affine subspace: proposals are
/// Gaussian steps along an orthonormal basis of the null space of `G`.
pub struct ProjectedChain<'a, T> {
    target: T,
    constraints: &'a ConstraintSystem,
    state: DVector<f64>,
    energy: f64,
    width: f64,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
    z: DVector<f64>,
}

impl<'a, T: TargetDensity> ProjectedChain<'a, T> {
    pub fn new(target: T, constraints: &'a ConstraintSystem, init: DVector<f64>, width: f64, seed: u64) -> Result<Self> {
        if init.len() != target.dim() || constraints.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                what: "constrained chain state",
                expected: target.dim(),
                found: init.len(),
            });
        }
        let energy = target.neg_log_density(init.as_slice());
        if !energy.is_finite() {
            return Err(Error::InvalidInit(format!("negative log-density {energy} at the feasible point")));
        }
        let k = constraints.null_basis().ncols();
        Ok(Self {
            target,
            constraints,
            state: init,
            energy,
            width,
            rng: seed::rng(seed),
            accepted: 0,
            proposed: 0,
            z: DVector::zeros(k),
        })
    }

    /// One proposal; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        if self.z.is_empty() {
            return false;
        }
        for v in self.z.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
        let mut proposal = self.constraints.null_basis() * &self.z;
        proposal *= self.width;
        proposal += &self.state;
        let e = self.target.neg_log_density(proposal.as_slice());
        let delta = e - self.energy;
        self.proposed += 1;
        let accept = delta <= 0.0 || self.rng.random::<f64>() < (-delta).exp();
        if accept {
            self.state = proposal;
            self.energy = e;
            self.accepted += 1;
        }
        if self.proposed % REPROJECT_EVERY == 0 {
            self.state = self.constraints.project(&self.state);
            self.energy = self.target.neg_log_density(self.state.as_slice());
        }
        accept
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Constrained sampling. In projection mode one sweep is `m − N` null-space
/// proposals and every emitted sample satisfies `G u = V`; in penalty mode the
/// penalised density is sampled with single-site sweeps.
pub fn run_constrained_chain_with<T: TargetDensity>(
    target: T,
    constraints: &ConstraintSystem,
    config: &ChainConfig,
    mut observe: impl FnMut(&[f64]),
) -> Result<ChainDiagnostics> {
    config.validate()?;
    let init = feasible_point(constraints);
    match constraints.mode() {
        ConstraintMode::Penalty { delta } => {
            let penalised = PenalizedTarget::new(target, constraints, delta);
            run_chain_with(penalised, init.as_slice(), config, observe)
        }
        ConstraintMode::Projection => {
            let mut chain = ProjectedChain::new(target, constraints, init, config.proposal_width, config.seed)?;
            let per_sweep = constraints.null_basis().ncols().max(1);
            let sweep = |c: &mut ProjectedChain<'_, T>| {
                (0..per_sweep).filter(|_| c.step()).count() as f64 / per_sweep as f64
            };
            let burn_rate = burn_in(config, &mut chain, sweep, |c, w| c.width = w, |c| c.width);
            chain.accepted = 0;
            chain.proposed = 0;
            for _ in 0..config.samples {
                for _ in 0..config.thin * per_sweep {
                    chain.step();
                }
                observe(chain.state().as_slice());
            }
            Ok(ChainDiagnostics {
                seed: config.seed,
                samples: config.samples,
                sweeps: config.burn_in + config.samples * config.thin,
                burn_in: config.burn_in,
                thin: config.thin,
                acceptance_rate: chain.acceptance_rate(),
                burn_in_acceptance_rate: burn_rate,
                proposal_width: chain.width,
            })
        }
    }
}

pub fn run_constrained_chain<T: TargetDensity>(
    target: T,
    constraints: &ConstraintSystem,
    config: &ChainConfig,
) -> Result<ChainRun> {
    let mut samples = SampleSet::new(constraints.dim());
    let diagnostics = run_constrained_chain_with(target, constraints, config, |x| samples.push(x))?;
    Ok(ChainRun { samples, diagnostics })
}
