use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use optpred::lattice::{EnsembleConfig, LatticeParams, ProfileChain};
use optpred::spectral_linear::LinearParams;
use optpred::{seed, NumericalPolicy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Master seed of the published runs.
pub const DEFAULT_SEED: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LinearInterpolant,
    LinearEvolve,
    NonlinearCovariance,
    NonlinearEffective,
    NonlinearEnsemble,
    NonlinearCompare,
    Spread,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::LinearInterpolant,
        Experiment::LinearEvolve,
        Experiment::NonlinearCovariance,
        Experiment::NonlinearEffective,
        Experiment::NonlinearEnsemble,
        Experiment::NonlinearCompare,
        Experiment::Spread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LinearInterpolant => "linear-interpolant",
            Experiment::LinearEvolve => "linear-evolve",
            Experiment::NonlinearCovariance => "nonlinear-covariance",
            Experiment::NonlinearEffective => "nonlinear-effective",
            Experiment::NonlinearEnsemble => "nonlinear-ensemble",
            Experiment::NonlinearCompare => "nonlinear-compare",
            Experiment::Spread => "spread",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                CliError::Usage(format!("unknown experiment `{s}` (expected one of {})", known.join(", ")))
            })
    }
}

/// Linear Schrödinger experiments. One model is built per kernel width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSection {
    pub m0: f64,
    pub n_kernels: usize,
    pub k_max: usize,
    /// Kernel widths as fractions of the kernel spacing.
    pub widths: Vec<f64>,
    /// Grid points of the interpolant output.
    pub n_eval: usize,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            m0: 1.0,
            n_kernels: 5,
            k_max: 512,
            widths: vec![1.0, 0.5, 0.1],
            n_eval: 256,
            t_end: 6.0,
            dt: 1e-3,
            record_every: 10,
        }
    }
}

impl LinearSection {
    pub fn params(&self, width: f64) -> LinearParams {
        LinearParams {
            m0: self.m0,
            n_kernels: self.n_kernels,
            sigma_frac: width,
            k_max: self.k_max,
        }
    }
}

/// Lattice experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearSection {
    pub lattice: LatticeParams,
    /// Covariance chain. Its seed is replaced by one derived from the master
    /// seed.
    pub chain: ProfileChain,
    /// Ensemble settings. Its seed is replaced likewise.
    pub ensemble: EnsembleConfig,
    /// Sweeps of the single-site chain that draws the canonical state the
    /// initial `V` is read from.
    pub canonical_sweeps: usize,
    /// Reuse a profile written by `nonlinear-covariance` instead of running
    /// the chain.
    pub profile_csv: Option<PathBuf>,
}

impl Default for NonlinearSection {
    fn default() -> Self {
        Self {
            lattice: LatticeParams::default(),
            chain: ProfileChain::default(),
            ensemble: EnsembleConfig::default(),
            canonical_sweeps: 20_000,
            profile_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub policy: NumericalPolicy,
    pub linear: LinearSection,
    pub nonlinear: NonlinearSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            policy: NumericalPolicy::default(),
            linear: LinearSection::default(),
            nonlinear: NonlinearSection::default(),
        }
    }
}

/// Sub-seeds, all derived from the master seed by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub linear_values: u64,
    pub covariance_chain: u64,
    pub lattice_values: u64,
    pub ensemble: u64,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            linear_values: seed::derive(master, "linear-values"),
            covariance_chain: seed::derive(master, "covariance-chain"),
            lattice_values: seed::derive(master, "lattice-values"),
            ensemble: seed::derive(master, "ensemble"),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {x}")))
    }
}

fn nonzero(name: &str, x: usize) -> Result<(), CliError> {
    if x > 0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be at least 1")))
    }
}

/// Parses a JSON configuration. Missing fields take their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Seeds {
        Seeds::new(self.seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let l = &self.linear;
        positive("linear.m0", l.m0)?;
        nonzero("linear.n_kernels", l.n_kernels)?;
        nonzero("linear.k_max", l.k_max)?;
        nonzero("linear.n_eval", l.n_eval)?;
        nonzero("linear.record_every", l.record_every)?;
        positive("linear.t_end", l.t_end)?;
        positive("linear.dt", l.dt)?;
        if l.widths.is_empty() {
            return Err(CliError::Config("linear.widths must not be empty".into()));
        }
        for &w in &l.widths {
            positive("linear.widths", w)?;
        }

        let n = &self.nonlinear;
        nonzero("nonlinear.lattice.n", n.lattice.n)?;
        nonzero("nonlinear.lattice.n_kernels", n.lattice.n_kernels)?;
        positive("nonlinear.lattice.sigma", n.lattice.sigma)?;
        nonzero("nonlinear.chain.chain.samples", n.chain.chain.samples)?;
        nonzero("nonlinear.chain.chain.thin", n.chain.chain.thin)?;
        nonzero("nonlinear.chain.replicas", n.chain.replicas)?;
        nonzero("nonlinear.chain.batches", n.chain.batches)?;
        positive("nonlinear.chain.chain.proposal_width", n.chain.chain.proposal_width)?;
        let e = &n.ensemble;
        nonzero("nonlinear.ensemble.count", e.count)?;
        nonzero("nonlinear.ensemble.record_every", e.record_every)?;
        nonzero("nonlinear.ensemble.histogram_every", e.histogram_every)?;
        nonzero("nonlinear.ensemble.histogram_bins", e.histogram_bins)?;
        nonzero("nonlinear.ensemble.replicas", e.replicas)?;
        nonzero("nonlinear.ensemble.thin", e.thin)?;
        nonzero("nonlinear.ensemble.batches", e.batches)?;
        positive("nonlinear.ensemble.t_end", e.t_end)?;
        positive("nonlinear.ensemble.dt", e.dt)?;
        positive("nonlinear.ensemble.proposal_width", e.proposal_width)?;
        nonzero("nonlinear.canonical_sweeps", n.canonical_sweeps)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(parse_config("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            let json = format!("{{\"experiment\": \"{e}\"}}");
            assert_eq!(parse_config(&json).unwrap().experiment, Some(e));
        }
        assert!(matches!("fig9".parse::<Experiment>(), Err(CliError::Usage(_))));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        assert!(matches!(parse_config("{\"sed\": 1}"), Err(CliError::Config(_))));
        assert!(matches!(parse_config("{\"experiment\": \"fig9\"}"), Err(CliError::Config(_))));
        let c = parse_config("{\"linear\": {\"dt\": -1.0}}").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = parse_config("{\"nonlinear\": {\"ensemble\": {\"count\": 0}}}").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn sub_seeds_are_distinct() {
        let s = Seeds::new(DEFAULT_SEED);
        let all = [s.linear_values, s.covariance_chain, s.lattice_values, s.ensemble];
        for i in 0..all.len() {
            for j in 0..i {
                assert_ne!(all[i], all[j]);
            }
        }
    }
}
