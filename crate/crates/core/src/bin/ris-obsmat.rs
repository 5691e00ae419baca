use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use ris_obsmat::sim::{harness, validation, SimConfig};
use ris_obsmat::Error;

#[derive(Parser)]
#[command(name = "ris-obsmat", version, about = "Pilot design and channel estimation benchmarks for RIS-aided links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the trial count from the config.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE versus SNR.
    SweepSnr(RunArgs),
    /// NMSE versus pilot length.
    SweepQ(RunArgs),
    /// Per-frame trace of the adaptive kernel-training loop.
    KernelTraining(RunArgs),
    /// Oracle identity suite.
    Validate(RunArgs),
}

enum Failure {
    Config(Error),
    Validation,
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<SimConfig, Failure> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| Failure::Config(Error::Config {
            field: "--config".into(),
            reason: "required for this subcommand".into(),
        }))?;
    let mut cfg = SimConfig::from_path(path).map_err(Failure::Config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
    fs::write(dir.join(name), bytes).map_err(|e| Failure::Runtime(e.into()))
}

fn write_meta(dir: &Path, subcommand: &str, cfg: Option<&SimConfig>, started: Instant) -> Result<(), Failure> {
    let meta = json!({
        "subcommand": subcommand,
        "config": cfg,
        "seed": cfg.map(|c| c.seed),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "wall_ms": started.elapsed().as_millis() as u64,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(dir, "run-meta.json", text.as_bytes())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    match cli.command {
        Command::SweepSnr(args) => {
            let cfg = load_config(&args)?;
            let rows = harness::run_sweep_snr(&cfg)?;
            write_file(&args.out, "sweep_snr.csv", &harness::result_csv(&rows)?)?;
            write_meta(&args.out, "sweep-snr", Some(&cfg), started)
        }
        Command::SweepQ(args) => {
            let cfg = load_config(&args)?;
            let rows = harness::run_sweep_q(&cfg)?;
            write_file(&args.out, "sweep_q.csv", &harness::result_csv(&rows)?)?;
            write_meta(&args.out, "sweep-q", Some(&cfg), started)
        }
        Command::KernelTraining(args) => {
            let cfg = load_config(&args)?;
            let rows = harness::run_kernel_training(&cfg)?;
            write_file(&args.out, "kernel_training.csv", &harness::training_csv(&rows)?)?;
            write_meta(&args.out, "kernel-training", Some(&cfg), started)
        }
        Command::Validate(args) => {
            let cfg = match args.config {
                Some(_) => Some(load_config(&args)?),
                None => None,
            };
            let report = validation::run_validation()?;
            for c in &report.checks {
                println!(
                    "{:<20} {} max_error={:.3e} tol={:.1e}",
                    c.check,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.max_error,
                    c.tolerance
                );
            }
            write_file(&args.out, "validation.csv", &harness::csv_bytes(&report.checks)?)?;
            write_meta(&args.out, "validate", cfg.as_ref(), started)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
