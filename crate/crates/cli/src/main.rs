use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isoflow_cli::config::{self, Experiment, OutputFormat};
use isoflow_cli::runner::{self, RunError};

/// Numerical laboratory for KdV-evolved Schrödinger potentials.
#[derive(Parser)]
#[command(name = "isoflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form travelling soliton at several flow times.
    Soliton(RunArgs),
    /// Evolve a potential under the KdV flow with invariant monitoring.
    Evolve(RunArgs),
    /// Track the Hamiltonian's bound states along the flow.
    Spectrum(RunArgs),
    /// Scattering coefficients a(k), b(k) along the flow.
    Scatter(RunArgs),
    /// Commutator equation, unitary propagation, conjugation witness.
    LaxCheck(RunArgs),
    /// 2D composition: one Hamiltonian, s-dependent subsystem splits.
    TensorDemo(RunArgs),
    /// Check a configuration file without running anything.
    Validate { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats (overrides the config's output.formats).
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<OutputFormat>>,
    /// Accepted for scripting compatibility; the tool never draws random
    /// numbers, so there is no seed to disable.
    #[arg(long = "seed-none")]
    seed_none: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

fn load(path: &PathBuf) -> Result<config::ConfigFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    config::parse_config(&text)
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> ExitCode {
    let config = match load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let issues = config::validate(&config, Some(experiment));
    if !issues.is_empty() {
        for issue in &issues {
            eprintln!("configuration error: {issue}");
        }
        return ExitCode::from(EXIT_CONFIG);
    }
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let formats = args
        .format
        .clone()
        .unwrap_or_else(|| config.output.formats.clone());

    match runner::run(experiment, &config, &out_dir, &formats) {
        Ok(report) => {
            for check in &report.checks {
                println!(
                    "{} {}: measured {:.6e} ({} {:.6e})",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.measured,
                    if check.comparison == "max" { "<" } else { ">" },
                    check.bound,
                );
            }
            if report.pass {
                println!("ok: {}", experiment.name());
                ExitCode::SUCCESS
            } else {
                eprintln!("invariant failure: see report");
                ExitCode::from(EXIT_INVARIANT)
            }
        }
        Err(RunError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn validate_only(path: &PathBuf) -> ExitCode {
    match load(path) {
        Ok(config) => {
            let issues = config::validate(&config, None);
            if issues.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for issue in &issues {
                    eprintln!("configuration error: {issue}");
                }
                ExitCode::from(EXIT_CONFIG)
            }
        }
        Err(e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Soliton(args) => run_experiment(Experiment::Soliton, &args),
        Command::Evolve(args) => run_experiment(Experiment::Evolve, &args),
        Command::Spectrum(args) => run_experiment(Experiment::Spectrum, &args),
        Command::Scatter(args) => run_experiment(Experiment::Scatter, &args),
        Command::LaxCheck(args) => run_experiment(Experiment::LaxCheck, &args),
        Command::TensorDemo(args) => run_experiment(Experiment::TensorDemo, &args),
        Command::Validate { path } => validate_only(&path),
    }
}
