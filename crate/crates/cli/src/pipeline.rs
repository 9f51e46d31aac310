//! Model construction and computations shared by the experiments, free of
//! any file output.

use std::fs::File;

use optpred::lattice::{
    ensemble_oracle, estimate_covariance, gaussianized_prior, parse_profile_csv, random_values as lattice_random_values,
    CovarianceProfile, EffectiveSystem, EnsembleConfig, LatticeModel, TrajectoryStats,
};
use optpred::ode::Trajectory;
use optpred::spectral_linear::{random_values, LinearModel};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One linear model together with its seeded data.
#[derive(Debug, Clone)]
pub struct LinearCase {
    pub width: f64,
    pub model: LinearModel,
    pub values: Vec<f64>,
}

pub fn linear_cases(config: &ExperimentConfig) -> Result<Vec<LinearCase>, CliError> {
    let seed = config.seeds().linear_values;
    config
        .linear
        .widths
        .iter()
        .map(|&width| {
            let model = LinearModel::gaussian_with_policy(&config.linear.params(width), config.policy)?;
            let values = random_values(&model, seed);
            Ok(LinearCase { width, model, values })
        })
        .collect()
}

pub fn lattice_model(config: &ExperimentConfig) -> Result<LatticeModel, CliError> {
    Ok(LatticeModel::new(config.nonlinear.lattice.clone())?)
}

/// Collective variables of one seeded canonical state.
pub fn lattice_values(config: &ExperimentConfig, model: &LatticeModel) -> Result<Vec<f64>, CliError> {
    Ok(lattice_random_values(
        model,
        config.nonlinear.canonical_sweeps,
        config.seeds().lattice_values,
    )?)
}

/// Loads the configured profile file, or runs the covariance chain.
pub fn covariance_profile(config: &ExperimentConfig, model: &LatticeModel) -> Result<CovarianceProfile, CliError> {
    if let Some(path) = &config.nonlinear.profile_csv {
        let profile = parse_profile_csv(File::open(path)?)?;
        if profile.n() != model.n() {
            return Err(CliError::Config(format!(
                "profile {} has {} entries, the lattice has {} sites",
                path.display(),
                profile.n(),
                model.n()
            )));
        }
        return Ok(profile);
    }
    let mut chain = config.nonlinear.chain.clone();
    chain.chain.seed = config.seeds().covariance_chain;
    Ok(estimate_covariance(model, &chain)?)
}

pub fn effective_system(
    config: &ExperimentConfig,
    model: &LatticeModel,
    profile: &CovarianceProfile,
) -> Result<EffectiveSystem, CliError> {
    let prior = gaussianized_prior(profile, model.dx(), &config.policy)?;
    Ok(EffectiveSystem::new(model, prior, &config.policy)?)
}

pub fn ensemble_config(config: &ExperimentConfig) -> EnsembleConfig {
    EnsembleConfig {
        seed: config.seeds().ensemble,
        ..config.nonlinear.ensemble.clone()
    }
}

pub fn ensemble(config: &ExperimentConfig, model: &LatticeModel, values: &[f64]) -> Result<TrajectoryStats, CliError> {
    Ok(ensemble_oracle(model, values, &ensemble_config(config), &config.policy)?)
}

/// Effective solution on the time grid of the ensemble.
pub fn effective_trajectory(
    config: &ExperimentConfig,
    system: &EffectiveSystem,
    values: &[f64],
) -> Result<Trajectory, CliError> {
    let e = &config.nonlinear.ensemble;
    Ok(system.integrate(values, e.t_end, e.dt, e.record_every)?)
}
