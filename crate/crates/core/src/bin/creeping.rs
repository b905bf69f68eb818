use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use creeping::experiment::{run_experiment, CheckName, ExperimentConfig, ExperimentError, Pipeline};

/// Linearized Navier-Stokes experiments: solve, verify and study.
///
/// Exit status: 0 when every selected check passes, 1 when a check fails
/// (reports are still written), 2 on configuration or I/O errors.
/// CREEPING_THREADS sets the worker thread count.
#[derive(Parser)]
#[command(name = "creeping", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, write LERF states, diagnostics CSV and the check report.
    Solve(Common),
    /// Re-audit the states stored under the output directory.
    Verify(Common),
    /// Mollifier checks over the configured epsilons.
    MollifyStudy(Common),
    /// Energy and solver residuals at (n, Δt) and (2n, Δt/2).
    ConvergenceStudy(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checks to run (replaces the config list); repeatable.
    #[arg(long = "check", num_args = 1..)]
    checks: Vec<CheckName>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "grid-L")]
    grid_l: Option<f64>,
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CREEPING_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("CREEPING_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn load(c: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    if let Some(out) = &c.out {
        cfg.output = out.clone();
    }
    if !c.checks.is_empty() {
        cfg.checks = c.checks.clone();
    }
    if let Some(n) = c.grid_n {
        cfg.grid.n = n;
    }
    if let Some(l) = c.grid_l {
        cfg.grid.half_width = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let (pipeline, common) = match &cli.command {
        Command::Solve(c) => (Pipeline::Solve, c),
        Command::Verify(c) => (Pipeline::Verify, c),
        Command::MollifyStudy(c) => (Pipeline::MollifyStudy, c),
        Command::ConvergenceStudy(c) => (Pipeline::ConvergenceStudy, c),
    };
    let result = load(common).and_then(|cfg| run_experiment(pipeline, &cfg));
    match result {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{} {}: lhs={:e} rhs={:e}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.lhs, r.rhs);
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
