//! `sepsim` command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sepsim::harness::{self, ExperimentConfig};
use sepsim::Error;

#[derive(Debug, Parser)]
#[command(
    name = "sepsim",
    version,
    about = "Symmetric exclusion simulator and hydrodynamic-limit checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate all replicas, evaluate the checks and write the report.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print stirring-duality estimates (and exact values) as JSON lines.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a configuration and print its normalized form.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write replica 0's binary event trace for every lattice size.
    #[arg(long)]
    debug_trace: bool,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Usage(_)
        | Error::Range(_)
        | Error::InvalidProfile(_)
        | Error::InfeasibleRegime { .. }
        | Error::ParameterExceedsOne { .. }
        | Error::DegenerateLattice { .. }
        | Error::LatticeOverflow { .. }
        | Error::DuplicatePoints
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn load(path: &Path, common: &Common) -> sepsim::Result<ExperimentConfig> {
    harness::load_config(path)?.with_overrides(common.seed, common.replicas, common.out.clone())
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment_id))
}

fn run(path: &Path, common: &Common) -> sepsim::Result<u8> {
    let cfg = load(path, common)?;
    let dir = output_dir(&cfg);
    let trace_dir = common.debug_trace.then(|| dir.join("traces"));
    let report = harness::run_experiment_traced(&cfg, trace_dir.as_deref())?;
    harness::write_report(&report, &cfg, &dir)?;
    for c in report.checks.iter().filter(|c| !c.record.pass) {
        eprintln!(
            "FAIL {} [{} {} L={} t={}]: estimate {} reference {} margin {} tolerance {}",
            c.name,
            c.observable,
            c.phi_id,
            c.side,
            c.t,
            c.record.estimate,
            c.record.reference,
            c.record.margin,
            c.record.tolerance
        );
    }
    let passed = report.checks.iter().filter(|c| c.record.pass).count();
    emit(&[format!(
        "{}: {passed}/{} checks passed, report in {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.checks.len(),
        dir.display()
    )])?;
    Ok(if report.pass { 0 } else { EXIT_CHECK_FAILED })
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(lines: &[String]) -> sepsim::Result<()> {
    let mut out = std::io::stdout().lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => {
                return Err(Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
            }
            Ok(()) => {}
        }
    }
    Ok(())
}

fn oracle(path: &Path, common: &Common) -> sepsim::Result<u8> {
    let cfg = load(path, common)?;
    let lines = harness::run_oracle(&cfg)?
        .iter()
        .map(serde_json::to_string)
        .collect::<Result<Vec<_>, _>>()?;
    emit(&lines)?;
    Ok(0)
}

fn validate(path: &Path, common: &Common) -> sepsim::Result<u8> {
    let cfg = load(path, common)?;
    emit(&[cfg.to_json()?])?;
    info!("content hash {}", cfg.content_hash()?);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (Command::Run { common, .. } | Command::Oracle { common, .. } | Command::Validate { common, .. }) =
        &cli.command;

    if let Some(threads) = common.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let result = match &cli.command {
        Command::Run { config, common } => run(config, common),
        Command::Oracle { config, common } => oracle(config, common),
        Command::Validate { config, common } => validate(config, common),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
