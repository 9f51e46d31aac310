use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LatticeModel;
use crate::conditioning::{block_diagonal, circulant, GaussianMoments};
use crate::error::{Error, Result};
use crate::mcmc::{run_chain_with, ChainConfig};
use crate::policy::NumericalPolicy;
use crate::seed;
use crate::stats::RunningStats;

/// Acceptance window outside which a covariance chain is considered mistuned.
pub const ACCEPTANCE_RANGE: (f64, f64) = (0.2, 0.8);
/// Cross covariances `⟨p q⟩` further than this many standard errors from zero
/// reject the profile.
const CROSS_SIGMAS: f64 = 5.0;

/// Chain settings for covariance estimation. Samples are split evenly over
/// independent replicas, each with its own derived seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileChain {
    pub chain: ChainConfig,
    pub replicas: usize,
    pub batches: usize,
}

impl Default for ProfileChain {
    fn default() -> Self {
        Self {
            chain: ChainConfig {
                samples: 2_000_000,
                burn_in: 100_000,
                thin: 10,
                proposal_width: 0.1,
                adapt: true,
                target_acceptance: 0.5,
                seed: 0,
            },
            replicas: 4,
            batches: 100,
        }
    }
}

/// `c(r) = ⟨p(j) p(j+r)⟩ = ⟨q(j) q(j+r)⟩`, `r = 0..n`, with error bars and the
/// chain that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceProfile {
    pub c: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance_rate: f64,
    pub seed: u64,
    /// Largest `|⟨p(j) q(j+r)⟩|` in units of its standard error.
    pub max_cross_sigmas: f64,
}

impl CovarianceProfile {
    /// A profile from known values (no chain metadata).
    pub fn from_values(c: Vec<f64>) -> Result<Self> {
        let n = c.len();
        let stderr = vec![0.0; n];
        let p = Self {
            c,
            stderr,
            samples: 0,
            burn_in: 0,
            thin: 0,
            acceptance_rate: 0.0,
            seed: 0,
            max_cross_sigmas: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Eigenvalues of the circulant covariance: the real DFT of `c`.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|k| {
                self.c
                    .iter()
                    .enumerate()
                    .map(|(r, &c)| c * (2.0 * std::f64::consts::PI * (k * r) as f64 / n as f64).cos())
                    .sum()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 || self.stderr.len() != n {
            return Err(Error::InvalidProfile(format!(
                "profile needs matching c and stderr of length >= 2 (got {} and {})",
                n,
                self.stderr.len()
            )));
        }
        if self.c.iter().chain(&self.stderr).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite profile entry".into()));
        }
        if self.c[0] <= 0.0 {
            return Err(Error::InvalidProfile(format!("c(0) = {} is not positive", self.c[0])));
        }
        for r in 1..n {
            let (a, b) = (self.c[r], self.c[n - r]);
            if (a - b).abs() > 1e-12 * self.c[0] {
                return Err(Error::InvalidProfile(format!("c({r}) = {a} differs from c({}) = {b}", n - r)));
            }
        }
        Ok(())
    }
}

/// Metropolis estimate of the canonical covariance profile with single-site
/// sweeps over all `2n` coordinates. Zero means are assumed by symmetry; the
/// `p`–`q` cross covariance is measured, checked against zero and dropped.
pub fn estimate_covariance(model: &LatticeModel, config: &ProfileChain) -> Result<CovarianceProfile> {
    config.chain.validate()?;
    let n = model.n();
    let replicas = config.replicas.max(1);
    let per_replica = config.chain.samples.div_ceil(replicas);
    let batches_per = config.batches.div_ceil(replicas).max(2);
    let runs: Vec<Result<ReplicaResult>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let chain = ChainConfig {
                samples: per_replica,
                seed: seed::derive_indexed(config.chain.seed, r as u64),
                ..config.chain.clone()
            };
            replica(model, &chain, batches_per)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let acceptance = runs.iter().map(|r| r.acceptance).sum::<f64>() / runs.len() as f64;
    if let Some(bad) = runs
        .iter()
        .map(|r| r.acceptance)
        .find(|a| !(ACCEPTANCE_RANGE.0..=ACCEPTANCE_RANGE.1).contains(a))
    {
        return Err(Error::Tuning {
            rate: bad,
            lo: ACCEPTANCE_RANGE.0,
            hi: ACCEPTANCE_RANGE.1,
            width: config.chain.proposal_width,
        });
    }

    let mut same = vec![RunningStats::new(); n];
    let mut cross = vec![RunningStats::new(); n];
    for run in &runs {
        for (batch_same, batch_cross) in run.batches_same.iter().zip(&run.batches_cross) {
            for r in 0..n {
                same[r].push(batch_same[r]);
                cross[r].push(batch_cross[r]);
            }
        }
    }
    let max_cross_sigmas = cross
        .iter()
        .map(|s| s.mean().abs() / s.std_error().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if max_cross_sigmas > CROSS_SIGMAS {
        return Err(Error::InvalidProfile(format!(
            "p-q cross covariance is {max_cross_sigmas:.1} standard errors from zero"
        )));
    }
    let profile = CovarianceProfile {
        c: same.iter().map(RunningStats::mean).collect(),
        stderr: same.iter().map(RunningStats::std_error).collect(),
        samples: per_replica * replicas,
        burn_in: config.chain.burn_in,
        thin: config.chain.thin,
        acceptance_rate: acceptance,
        seed: config.chain.seed,
        max_cross_sigmas,
    };
    let mut profile = profile;
    symmetrize(&mut profile.c);
    symmetrize(&mut profile.stderr);
    profile.validate()?;
    Ok(profile)
}

/// Averages `c(r)` with `c(n−r)`; the estimator is symmetric up to rounding.
fn symmetrize(c: &mut [f64]) {
    let n = c.len();
    for r in 1..=n / 2 {
        let m = 0.5 * (c[r] + c[n - r]);
        c[r] = m;
        c[n - r] = m;
    }
}

struct ReplicaResult {
    acceptance: f64,
    batches_same: Vec<Vec<f64>>,
    batches_cross: Vec<Vec<f64>>,
}

fn replica(model: &LatticeModel, chain: &ChainConfig, batches: usize) -> Result<ReplicaResult> {
    let n = model.n();
    let batch_len = (chain.samples / batches).max(1);
    let mut acc_same = vec![0.0; n];
    let mut acc_cross = vec![0.0; n];
    let mut filled = 0usize;
    let mut batches_same = Vec::with_capacity(batches);
    let mut batches_cross = Vec::with_capacity(batches);
    let init = vec![0.0; 2 * n];
    let diag = run_chain_with(model, &init, chain, |x| {
        let (p, q) = x.split_at(n);
        for r in 0..n {
            let (mut s, mut c) = (0.0, 0.0);
            for j in 0..n {
                let k = (j + r) % n;
                s += p[j] * p[k] + q[j] * q[k];
                c += p[j] * q[k] + q[j] * p[k];
            }
            acc_same[r] += s / (2 * n) as f64;
            acc_cross[r] += c / (2 * n) as f64;
        }
        filled += 1;
        if filled == batch_len {
            batches_same.push(acc_same.iter().map(|v| v / batch_len as f64).collect());
            batches_cross.push(acc_cross.iter().map(|v| v / batch_len as f64).collect());
            acc_same.iter_mut().for_each(|v| *v = 0.0);
            acc_cross.iter_mut().for_each(|v| *v = 0.0);
            filled = 0;
        }
    })?;
    Ok(ReplicaResult {
        acceptance: diag.acceptance_rate,
        batches_same,
        batches_cross,
    })
}

/// Zero-mean Gaussian with `p` and `q` blocks equal to the circulant of `c`
/// and no cross covariance.
pub fn gaussianized_prior(
    profile: &CovarianceProfile,
    spacing: f64,
    policy: &NumericalPolicy,
) -> Result<GaussianMoments> {
    profile.validate()?;
    let spectrum = profile.spectrum();
    let floor = policy.spd_floor(profile.c[0]).abs();
    if let Some(k) = spectrum.iter().position(|&l| l <= floor) {
        return Err(Error::InvalidProfile(format!(
            "circulant covariance is not positive definite (eigenvalue {} at wavenumber {k})",
            spectrum[k]
        )));
    }
    let block = circulant(&profile.c);
    GaussianMoments::zero_mean(2, profile.n(), spacing, block_diagonal(&block, 2), policy)
}

/// `r,c,stderr` CSV.
pub fn write_profile_csv<W: Write>(profile: &CovarianceProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "c", "stderr"])?;
    for (r, (c, e)) in profile.c.iter().zip(&profile.stderr).enumerate() {
        w.write_record([r.to_string(), format!("{c:e}"), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `r,c,stderr` CSV. Rows must be `r = 0, 1, ..` in order.
pub fn parse_profile_csv<R: Read>(input: R) -> Result<CovarianceProfile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "c", "stderr"] {
        return Err(Error::Parse(format!("expected header r,c,stderr, found {:?}", headers)));
    }
    let mut c = Vec::new();
    let mut stderr = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!("row {i} has {} fields", rec.len())));
        }
        let field = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {i}, column {k}: {e}")))
        };
        let r: usize = rec[0]
            .parse()
            .map_err(|e| Error::Parse(format!("row {i}: bad separation: {e}")))?;
        if r != i {
            return Err(Error::Parse(format!("row {i} has separation {r}")));
        }
        c.push(field(1)?);
        stderr.push(field(2)?);
    }
    let profile = CovarianceProfile {
        c,
        stderr,
        samples: 0,
        burn_in: 0,
        thin: 0,
        acceptance_rate: 0.0,
        seed: 0,
        max_cross_sigmas: 0.0,
    };
    profile.validate()?;
    Ok(profile)
}
