use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::TargetDensity;
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::{batch_means, Estimate};

/// Sweeps between proposal-width updates during burn-in.
const ADAPT_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Samples emitted after burn-in.
    pub samples: usize,
    /// Sweeps discarded before sampling; the proposal width adapts only here.
    pub burn_in: usize,
    /// Sweeps between emitted samples.
    pub thin: usize,
    pub proposal_width: f64,
    pub adapt: bool,
    pub target_acceptance: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            burn_in: 1_000,
            thin: 1,
            proposal_width: 0.1,
            adapt: true,
            target_acceptance: 0.5,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::InvalidInput("chain needs samples >= 1 and thin >= 1".into()));
        }
        if !(self.proposal_width > 0.0 && self.proposal_width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "proposal width must be positive, got {}",
                self.proposal_width
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidInput("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub seed: u64,
    pub samples: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Acceptance over the sampling phase.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Width in effect after burn-in.
    pub proposal_width: f64,
}

impl ChainDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialise")
    }
}

/// Samples from a finished chain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.data.extend_from_slice(x);
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.iter().map(|x| x[j]).collect()
    }

    /// Per-coordinate mean with batch-means error bars.
    pub fn mean_estimates(&self, batches: usize) -> Vec<Estimate> {
        (0..self.dim).map(|j| batch_means(&self.coordinate(j), batches)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: SampleSet,
    pub diagnostics: ChainDiagnostics,
}

/// Random-walk Metropolis with single-site Gaussian proposals, swept in
/// coordinate order.
pub struct MetropolisChain<T> {
    target: T,
    state: Vec<f64>,
    width: f64,
    scales: Vec<f64>,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl<T: TargetDensity> MetropolisChain<T> {
    pub fn new(target: T, init: &[f64], width: f64, seed: u64) -> Result<Self> {
        if init.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: target.dim(),
                found: init.len(),
            });
        }
        let e = target.neg_log_density(init);
        if !e.is_finite() || init.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInit(format!("negative log-density {e} at the initial state")));
        }
        let scales = target.scale_hints().unwrap_or_else(|| vec![1.0; init.len()]);
        Ok(Self {
            target,
            state: init.to_vec(),
            width,
            scales,
            rng: seed::rng(seed),
            accepted: 0,
            proposed: 0,
        })
    }

    /// One Metropolis update of every coordinate; returns accepted moves.
    pub fn sweep(&mut self) -> u64 {
        let mut acc = 0;
        for i in 0..self.state.len() {
            let z: f64 = self.rng.sample(StandardNormal);
            let new = self.state[i] + self.width * self.scales[i] * z;
            let delta = self.target.single_site_delta(&self.state, i, new);
            // Accept with probability min(1, exp(-delta)).
            if delta <= 0.0 || self.rng.random::<f64>() < (-delta).exp() {
                self.state[i] = new;
                acc += 1;
            }
        }
        self.accepted += acc;
        self.proposed += self.state.len() as u64;
        acc
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Runs burn-in (with optional width adaptation) and hands every emitted
/// sample to `observe`.
pub fn run_chain_with<T: TargetDensity>(
    target: T,
    init: &[f64],
    config: &ChainConfig,
    mut observe: impl FnMut(&[f64]),
) -> Result<ChainDiagnostics> {
    config.validate()?;
    let mut chain = MetropolisChain::new(target, init, config.proposal_width, config.seed)?;
    let burn_rate = burn_in(
        config,
        &mut chain,
        |c| c.sweep() as f64 / c.state.len().max(1) as f64,
        |c, w| c.width = w,
        |c| c.width,
    );
    chain.reset_counters();
    for _ in 0..config.samples {
        for _ in 0..config.thin {
            chain.sweep();
        }
        observe(chain.state());
    }
    Ok(ChainDiagnostics {
        seed: config.seed,
        samples: config.samples,
        sweeps: config.burn_in + config.samples * config.thin,
        burn_in: config.burn_in,
        thin: config.thin,
        acceptance_rate: chain.acceptance_rate(),
        burn_in_acceptance_rate: burn_rate,
        proposal_width: chain.width(),
    })
}

/// Collects every emitted sample in memory.
pub fn run_chain<T: TargetDensity>(target: T, init: &[f64], config: &ChainConfig) -> Result<ChainRun> {
    let mut samples = SampleSet::new(init.len());
    let diagnostics = run_chain_with(target, init, config, |x| samples.push(x))?;
    Ok(ChainRun { samples, diagnostics })
}

/// Shared burn-in loop: multiplicative width updates toward the target
/// acceptance in windows, frozen afterwards. Returns the burn-in acceptance.
pub(crate) fn burn_in<C>(
    config: &ChainConfig,
    chain: &mut C,
    mut sweep: impl FnMut(&mut C) -> f64,
    mut set_width: impl FnMut(&mut C, f64),
    width: impl Fn(&C) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut window = 0.0;
    for s in 1..=config.burn_in {
        let rate = sweep(chain);
        total += rate;
        window += rate;
        if config.adapt && s % ADAPT_WINDOW == 0 {
            let observed = window / ADAPT_WINDOW as f64;
            let w = width(chain) * (2.0 * (observed - config.target_acceptance)).exp();
            set_width(chain, w);
            window = 0.0;
        }
    }
    if config.burn_in == 0 {
        0.0
    } else {
        total / config.burn_in as f64
    }
}
