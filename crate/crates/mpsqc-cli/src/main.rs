//! `mpsqc`: batch runs that reproduce the benchmark figures as CSV/JSON artifacts.

mod config;
mod error;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, ExperimentKind};
use error::{CliError, CliResult};
use experiments::Run;

#[derive(Parser)]
#[command(name = "mpsqc", version, about = "Compile matrix product states into quantum circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for scans.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
#[command(rename_all = "snake_case")]
enum Command {
    /// Right-canonical form of a stored MPS.
    Canonicalize(Common),
    /// Circuit for a stored MPS, with a verification report.
    Compile(Common),
    /// Simulate a stored circuit against a stored MPS.
    Verify(Common),
    /// Post-selection rates of Heisenberg rings over N and D.
    SuccessRateScan(Common),
    /// Infidelity of ladder-decomposed ring circuits over N and L.
    DecomposeScan(Common),
    /// Disentangler fidelity against the number of layers.
    DisentangleScan(Common),
    /// Entanglement growth after an anisotropy quench.
    Quench(Common),
    /// Schwinger excited states: reference spectrum and compiled fidelities.
    SchwingerSpectrum(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Canonicalize(c) => (ExperimentKind::Canonicalize, c),
            Command::Compile(c) => (ExperimentKind::Compile, c),
            Command::Verify(c) => (ExperimentKind::Verify, c),
            Command::SuccessRateScan(c) => (ExperimentKind::SuccessRateScan, c),
            Command::DecomposeScan(c) => (ExperimentKind::DecomposeScan, c),
            Command::DisentangleScan(c) => (ExperimentKind::DisentangleScan, c),
            Command::Quench(c) => (ExperimentKind::Quench, c),
            Command::SchwingerSpectrum(c) => (ExperimentKind::SchwingerSpectrum, c),
        }
    }
}

fn execute(kind: ExperimentKind, args: Common) -> CliResult<()> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate(kind)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", args.out_dir.display())))?;
    let mut run = Run::new(args.out_dir.clone(), args.threads);
    experiments::run(kind, &cfg, &mut run).map_err(|e| e.context(kind.name()))?;
    let manifest = json!({
        "experiment": kind.name(),
        "config": cfg,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "metrics": run.metrics,
        "artifacts": run.artifacts,
    });
    let body = mpsqc::json::to_canonical_string_pretty(&manifest)? + "\n";
    let path = args.out_dir.join("manifest.json");
    std::fs::write(&path, body).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mpsqc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
