use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use rlw::config::{Experiment, RunConfig};
use rlw::experiments::run_experiment;
use rlw::Error;

/// Structure-preserving RLW experiments.
///
/// Commands: converge1d, efficiency, two-soliton, converge2d, bore2d,
/// maxwellian2d, custom. Settings are `key=value` pairs; the output
/// directory can also be set through the RLW_OUT environment variable.
#[derive(Debug, Parser)]
#[command(name = "rlw", version)]
struct Cli {
    /// Experiment to run.
    command: String,

    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// `key=value` overrides, applied after the configuration file.
    overrides: Vec<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let experiment: Experiment = cli.command.parse()?;
    let mut cfg = RunConfig::load(experiment, cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = std::env::var_os("RLW_OUT") {
        cfg.out_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&cfg) {
        Ok(report) => {
            for f in report.files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
                println!("{}", f.display());
            }
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    error!("solver failure: {f}");
                }
                ExitCode::from(EXIT_SOLVER)
            }
        }
        Err(e) if e.is_solver_failure() => {
            error!("{e}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
