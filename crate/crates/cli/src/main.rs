use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use optpred_cli::{parse_config, run, CliError, Experiment, ExperimentConfig};

/// Runs one optimal-prediction experiment and writes CSV files plus
/// `manifest.json`.
#[derive(Debug, Parser)]
#[command(name = "optpred", version)]
struct Args {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name, overriding the configuration.
    #[arg(long)]
    experiment: Option<String>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &args.experiment {
        config.experiment = Some(name.parse::<Experiment>()?);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    Ok(config)
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("PREDICT_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("PREDICT_THREADS must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = threads().and_then(|n| {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        run(&configure(args)?)
    });
    match result {
        Ok(summary) => {
            for f in &summary.outputs {
                println!("{}", f.display());
            }
            println!("{}", summary.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("optpred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
