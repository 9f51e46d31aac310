use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LatticeModel;
use crate::error::{Error, Result};
use crate::mcmc::{run_constrained_chain, ChainConfig, ConstraintMode, ConstraintSystem};
use crate::ode::{integrate, OdeProblem, Rk4};
use crate::policy::NumericalPolicy;
use crate::seed;
use crate::stats::{batch_means, Estimate, Histogram};

/// Largest admissible `dt · 4/Δx²` for RK4 on the stiff linear part.
pub const RK4_STABILITY: f64 = 2.5;

/// Largest stable step for the given model.
pub fn stability_bound(model: &LatticeModel) -> f64 {
    RK4_STABILITY * model.dx() * model.dx() / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub count: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Integration steps between recorded time levels.
    pub record_every: usize,
    /// Recorded levels between histogram snapshots.
    pub histogram_every: usize,
    pub histogram_bins: usize,
    /// Independent constrained chains the initial states are drawn from.
    pub replicas: usize,
    /// Sweeps discarded per replica.
    pub burn_in: usize,
    /// Sweeps between consecutive ensemble members of one replica.
    pub thin: usize,
    pub proposal_width: f64,
    /// Batches for the error bars of ensemble averages.
    pub batches: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            count: 10_000,
            t_end: 1.0,
            dt: 1e-3,
            record_every: 10,
            histogram_every: 5,
            histogram_bins: 40,
            replicas: 8,
            burn_in: 5_000,
            thin: 20,
            proposal_width: 0.02,
            batches: 50,
            seed: 0,
        }
    }
}

/// Ensemble statistics of the collective variables at each recorded level.
#[derive(Debug, Clone)]
pub struct TrajectoryStats {
    pub count: usize,
    pub times: Vec<f64>,
    /// `means[level][variable]`, variables ordered `U^p` then `U^q`.
    pub means: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub histogram_times: Vec<f64>,
    /// Distribution of `U^p_1` at each histogram time.
    pub histograms: Vec<Histogram>,
    /// Central difference `(⟨U(dt)⟩ − ⟨U(−dt)⟩)/2dt` per variable.
    pub slope: Vec<Estimate>,
    /// Forward difference `(⟨U(dt)⟩ − V)/dt` per variable.
    pub forward_slope: Vec<Estimate>,
    /// Ensemble mean of the exact time derivative `G f(u)` at `t = 0`.
    pub drift: Vec<Estimate>,
    pub slope_dt: f64,
    pub max_energy_drift: f64,
    pub mean_energy_drift: f64,
    pub max_constraint_residual: f64,
    pub acceptance_rate: f64,
}

/// Samples `count` states from the canonical density `exp(−H)` restricted to
/// `G u = V` (projection mode), integrates each with RK4 and collects
/// statistics of the collective variables.
pub fn ensemble_oracle(
    model: &LatticeModel,
    values: &[f64],
    config: &EnsembleConfig,
    policy: &NumericalPolicy,
) -> Result<TrajectoryStats> {
    let bound = stability_bound(model);
    if !(config.dt > 0.0) || config.dt > bound {
        return Err(Error::InvalidDt { dt: config.dt, bound });
    }
    if config.count == 0 || config.record_every == 0 || config.histogram_every == 0 || config.histogram_bins == 0 {
        return Err(Error::InvalidInput(
            "ensemble needs count, record_every, histogram_every and histogram_bins >= 1".into(),
        ));
    }
    let nv = 2 * model.n_kernels();
    if values.len() != nv {
        return Err(Error::DimensionMismatch {
            what: "collective variable values",
            expected: nv,
            found: values.len(),
        });
    }
    let g = model.kernel_set(policy)?.matrix(2)?;
    let constraints = ConstraintSystem::new(
        g,
        DVector::from_column_slice(values),
        ConstraintMode::Projection,
        policy,
    )?;

    // Initial states, replica-major order.
    let replicas = config.replicas.clamp(1, config.count);
    let per = config.count.div_ceil(replicas);
    let chain_seed = seed::derive(config.seed, "ensemble-chain");
    let runs = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let chain = ChainConfig {
                samples: per,
                burn_in: config.burn_in,
                thin: config.thin.max(1),
                proposal_width: config.proposal_width,
                adapt: true,
                target_acceptance: 0.5,
                seed: seed::derive_indexed(chain_seed, r as u64),
            };
            run_constrained_chain(model, &constraints, &chain)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let acceptance_rate = runs.iter().map(|r| r.diagnostics.acceptance_rate).sum::<f64>() / runs.len() as f64;
    let states: Vec<&[f64]> = runs
        .iter()
        .flat_map(|r| r.samples.iter())
        .take(config.count)
        .collect();
    let max_constraint_residual = states.iter().map(|s| constraints.residual(s)).fold(0.0, f64::max);

    let records = states
        .par_iter()
        .map(|s| evolve(model, s, config))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let times = records[0].times.clone();
    let levels = times.len();
    let batches = config.batches.clamp(2, config.count.max(2));
    let mut means = vec![vec![0.0; nv]; levels];
    let mut std_errors = vec![vec![0.0; nv]; levels];
    let mut variances = vec![vec![0.0; nv]; levels];
    let mut series = vec![0.0; records.len()];
    for l in 0..levels {
        for v in 0..nv {
            for (s, rec) in series.iter_mut().zip(&records) {
                *s = rec.values[l][v];
            }
            let est = batch_means(&series, batches);
            let m = series.iter().sum::<f64>() / series.len() as f64;
            let var = if series.len() > 1 {
                series.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (series.len() - 1) as f64
            } else {
                0.0
            };
            means[l][v] = m;
            std_errors[l][v] = est.std_error;
            variances[l][v] = var;
        }
    }

    let hist_levels: Vec<usize> = (0..levels).step_by(config.histogram_every).collect();
    let (lo, hi) = records
        .iter()
        .flat_map(|r| hist_levels.iter().map(move |&l| r.values[l][0]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let pad = ((hi - lo) * 0.01).max(1e-9);
    let histograms = hist_levels
        .iter()
        .map(|&l| {
            let mut h = Histogram::new(lo - pad, hi + pad, config.histogram_bins);
            records.iter().for_each(|r| h.add(r.values[l][0]));
            h
        })
        .collect();

    let estimate = |f: &dyn Fn(&Record, usize) -> f64| -> Vec<Estimate> {
        (0..nv)
            .map(|v| {
                let s: Vec<f64> = records.iter().map(|r| f(r, v)).collect();
                batch_means(&s, batches)
            })
            .collect()
    };
    let slope = estimate(&|r, v| (r.first_step[v] - r.back_step[v]) / (2.0 * config.dt));
    let forward_slope = estimate(&|r, v| (r.first_step[v] - values[v]) / config.dt);
    let drift = estimate(&|r, v| r.drift[v]);

    Ok(TrajectoryStats {
        count: records.len(),
        histogram_times: hist_levels.iter().map(|&l| times[l]).collect(),
        times,
        means,
        std_errors,
        variances,
        histograms,
        slope,
        forward_slope,
        drift,
        slope_dt: config.dt,
        max_energy_drift: records.iter().map(|r| r.energy_drift).fold(0.0, f64::max),
        mean_energy_drift: records.iter().map(|r| r.energy_drift).sum::<f64>() / records.len() as f64,
        max_constraint_residual,
        acceptance_rate,
    })
}

struct Record {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    first_step: Vec<f64>,
    back_step: Vec<f64>,
    drift: Vec<f64>,
    energy_drift: f64,
}

fn evolve(model: &LatticeModel, state: &[f64], config: &EnsembleConfig) -> Result<Record> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| model.fine_rhs_flat(y, dy);
    let traj = integrate(&OdeProblem {
        rhs,
        y0: state.to_vec(),
        t_end: config.t_end,
        dt: config.dt,
        record_every: config.record_every,
    })?;
    let mut rk4 = Rk4::new(state.len());
    let mut forward = state.to_vec();
    rk4.step(&rhs, 0.0, &mut forward, config.dt);
    let mut backward = state.to_vec();
    rk4.step(&rhs, 0.0, &mut backward, -config.dt);
    let mut derivative = vec![0.0; state.len()];
    model.fine_rhs_flat(state, &mut derivative);
    let h0 = model.hamiltonian_flat(state);
    let h1 = model.hamiltonian_flat(traj.last());
    Ok(Record {
        values: traj.states.iter().map(|s| model.collective(s)).collect(),
        times: traj.times,
        first_step: model.collective(&forward),
        back_step: model.collective(&backward),
        drift: model.collective(&derivative),
        energy_drift: ((h1 - h0) / h0).abs(),
    })
}
