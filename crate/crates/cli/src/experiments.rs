use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use optpred::lattice::{write_profile_csv, CovarianceProfile, EffectiveSystem, TrajectoryStats};
use optpred::spectral_linear::{compare, optimal_interpolant, rms};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::pipeline::{self, LinearCase};

/// Files written by one run, relative to the output directory, and the
/// quantities recorded in the manifest.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub outputs: Vec<PathBuf>,
    pub derived: Value,
    pub manifest: PathBuf,
}

/// Column names `{prefix}_Up1.., {prefix}_Uq1..`.
pub fn columns(prefix: &str, n_kernels: usize) -> Vec<String> {
    ["Up", "Uq"]
        .iter()
        .flat_map(|c| (1..=n_kernels).map(move |a| format!("{prefix}_{c}{a}")))
        .collect()
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Output<'_> {
    fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(self.dir.join(name))?));
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }
}

fn width_tag(width: f64) -> String {
    format!("sigma{width}")
}

/// Runs the configured experiment and writes its CSV files and
/// `manifest.json` into the output directory.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let experiment = config
        .experiment
        .ok_or_else(|| CliError::Usage("no experiment selected".into()))?;
    config.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&config.output_dir)?;
    let mut out = Output {
        dir: &config.output_dir,
        files: Vec::new(),
    };
    let derived = match experiment {
        Experiment::LinearInterpolant => linear_interpolant(config, &mut out)?,
        Experiment::LinearEvolve => linear_evolve(config, &mut out)?,
        Experiment::NonlinearCovariance => nonlinear_covariance(config, &mut out)?,
        Experiment::NonlinearEffective => nonlinear_effective(config, &mut out)?,
        Experiment::NonlinearEnsemble => nonlinear_ensemble(config, &mut out)?,
        Experiment::NonlinearCompare => nonlinear_compare(config, &mut out)?,
        Experiment::Spread => spread(config, &mut out)?,
    };
    let manifest = json!({
        "experiment": experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": config.seeds(),
        "config": config,
        "outputs": out.files,
        "derived": derived,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    let manifest_path = config.output_dir.join("manifest.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
    Ok(RunSummary {
        experiment,
        outputs: out.files,
        derived,
        manifest: manifest_path,
    })
}

fn linear_interpolant(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let n_eval = config.linear.n_eval;
    let mut derived = Vec::new();
    for LinearCase { width, model, values } in pipeline::linear_cases(config)? {
        let field = optimal_interpolant(&model, &values, n_eval)?;
        let tag = width_tag(width);
        let header = ["x", "interp_p", "interp_q"].map(String::from);
        let rows = field
            .coordinates()
            .into_iter()
            .enumerate()
            .map(|(i, x)| vec![x, field.component(0)[i], field.component(1)[i]]);
        out.csv(&format!("interpolant_{tag}.csv"), &header, rows)?;
        let nk = model.n_kernels();
        let header = ["alpha", "x", "Vp", "Vq"].map(String::from);
        let rows = (0..nk).map(|a| vec![(a + 1) as f64, model.centers()[a], values[a], values[nk + a]]);
        out.csv(&format!("points_{tag}.csv"), &header, rows)?;
        derived.push(json!({ "width": width, "sigma": model.sigma(), "k_max": model.k_max(), "values": values }));
    }
    Ok(json!({ "cases": derived }))
}

fn linear_evolve(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let l = &config.linear;
    let mut derived = Vec::new();
    for LinearCase { width, model, values } in pipeline::linear_cases(config)? {
        let cmp = compare(&model, &values, l.t_end, l.dt, l.record_every)?;
        let nk = model.n_kernels();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain(columns("exact", nk))
            .chain(columns("approx", nk))
            .collect();
        let rows = (0..cmp.times.len()).map(|i| {
            let mut row = vec![cmp.times[i]];
            row.extend(&cmp.exact[i]);
            row.extend(&cmp.effective[i]);
            row
        });
        out.csv(&format!("evolve_{}.csv", width_tag(width)), &header, rows)?;
        let scale = rms(&values);
        derived.push(json!({
            "width": width,
            "values": values,
            "initial_rms": scale,
            "max_error_up1_relative": cmp.max_error(0) / scale,
            "deviation_time_5pct_up1": cmp.deviation_time(0, 0.05 * scale),
        }));
    }
    Ok(json!({ "cases": derived }))
}

fn profile_json(profile: &CovarianceProfile) -> Value {
    json!({
        "samples": profile.samples,
        "burn_in": profile.burn_in,
        "thin": profile.thin,
        "seed": profile.seed,
        "acceptance_rate": profile.acceptance_rate,
        "max_cross_sigmas": profile.max_cross_sigmas,
        "c": profile.c,
        "stderr": profile.stderr,
    })
}

fn nonlinear_covariance(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let model = pipeline::lattice_model(config)?;
    let profile = pipeline::covariance_profile(config, &model)?;
    write_profile_csv(&profile, BufWriter::new(File::create(out.dir.join("covariance.csv"))?))?;
    out.files.push(PathBuf::from("covariance.csv"));
    Ok(json!({ "profile": profile_json(&profile), "spectrum": profile.spectrum() }))
}

fn polynomials_json(system: &EffectiveSystem) -> Value {
    system
        .polynomials()
        .iter()
        .enumerate()
        .map(|(i, p)| json!({ "equation": format!("d{}/dt", p.names[i]), "rhs": p.to_string(), "terms": p.terms }))
        .collect()
}

fn nonlinear_effective(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let model = pipeline::lattice_model(config)?;
    let profile = pipeline::covariance_profile(config, &model)?;
    let system = pipeline::effective_system(config, &model, &profile)?;
    let values = pipeline::lattice_values(config, &model)?;
    let traj = pipeline::effective_trajectory(config, &system, &values)?;
    let mut header = vec!["t".to_string()];
    header.extend(columns("eff", model.n_kernels()));
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, s)| {
        let mut row = vec![t];
        row.extend(s);
        row
    });
    out.csv("effective.csv", &header, rows)?;
    let mut rhs = vec![0.0; system.dim()];
    system.rhs(&values, &mut rhs);
    Ok(json!({
        "values": values,
        "rhs_at_values": rhs,
        "polynomials": polynomials_json(&system),
        "profile": profile_json(&profile),
    }))
}

fn ensemble_json(stats: &TrajectoryStats) -> Value {
    let est = |v: &[optpred::stats::Estimate]| -> Value {
        v.iter().map(|e| json!({ "mean": e.mean, "std_error": e.std_error })).collect()
    };
    json!({
        "count": stats.count,
        "acceptance_rate": stats.acceptance_rate,
        "max_constraint_residual": stats.max_constraint_residual,
        "max_energy_drift": stats.max_energy_drift,
        "mean_energy_drift": stats.mean_energy_drift,
        "slope_dt": stats.slope_dt,
        "central_slope": est(&stats.slope),
        "forward_slope": est(&stats.forward_slope),
        "drift": est(&stats.drift),
    })
}

fn nonlinear_ensemble(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let model = pipeline::lattice_model(config)?;
    let values = pipeline::lattice_values(config, &model)?;
    let stats = pipeline::ensemble(config, &model, &values)?;
    let nk = model.n_kernels();
    let mut header = vec!["t".to_string()];
    header.extend(columns("mean", nk));
    header.extend(columns("stderr", nk));
    header.extend(columns("var", nk));
    let rows = (0..stats.times.len()).map(|l| {
        let mut row = vec![stats.times[l]];
        row.extend(&stats.means[l]);
        row.extend(&stats.std_errors[l]);
        row.extend(&stats.variances[l]);
        row
    });
    out.csv("ensemble.csv", &header, rows)?;
    Ok(json!({ "values": values, "ensemble": ensemble_json(&stats) }))
}

fn nonlinear_compare(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let model = pipeline::lattice_model(config)?;
    let profile = pipeline::covariance_profile(config, &model)?;
    let system = pipeline::effective_system(config, &model, &profile)?;
    let values = pipeline::lattice_values(config, &model)?;
    let stats = pipeline::ensemble(config, &model, &values)?;
    let traj = pipeline::effective_trajectory(config, &system, &values)?;
    let nk = model.n_kernels();
    let mut header = vec!["t".to_string()];
    header.extend(columns("mean", nk));
    header.extend(columns("eff", nk));
    let rows = (0..stats.times.len()).map(|l| {
        let mut row = vec![stats.times[l]];
        row.extend(&stats.means[l]);
        row.extend(&traj.states[l]);
        row
    });
    out.csv("compare.csv", &header, rows)?;
    let scale = rms(&values);
    let max_deviation: Vec<f64> = (0..2 * nk)
        .map(|v| {
            (0..stats.times.len())
                .map(|l| (stats.means[l][v] - traj.states[l][v]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(json!({
        "values": values,
        "initial_rms": scale,
        "max_deviation": max_deviation,
        "polynomials": polynomials_json(&system),
        "profile": profile_json(&profile),
        "ensemble": ensemble_json(&stats),
    }))
}

fn spread(config: &ExperimentConfig, out: &mut Output) -> Result<Value, CliError> {
    let model = pipeline::lattice_model(config)?;
    let values = pipeline::lattice_values(config, &model)?;
    let stats = pipeline::ensemble(config, &model, &values)?;
    let header = ["t", "bin_lo", "bin_hi", "density"].map(String::from);
    let rows = stats
        .histogram_times
        .iter()
        .zip(&stats.histograms)
        .flat_map(|(&t, h)| {
            h.densities()
                .into_iter()
                .enumerate()
                .map(move |(i, d)| {
                    let (lo, hi) = h.edges(i);
                    vec![t, lo, hi, d]
                })
                .collect::<Vec<_>>()
        });
    out.csv("histogram.csv", &header, rows)?;
    let header = ["t", "var_Up1"].map(String::from);
    let rows = stats.times.iter().zip(&stats.variances).map(|(&t, v)| vec![t, v[0]]);
    out.csv("variance.csv", &header, rows)?;
    Ok(json!({
        "values": values,
        "histogram_levels": stats.histograms.len(),
        "variance_up1_start": stats.variances[0][0],
        "variance_up1_end": stats.variances[stats.variances.len() - 1][0],
        "ensemble": ensemble_json(&stats),
    }))
}
