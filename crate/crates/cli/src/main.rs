mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::Experiment;

#[derive(Parser)]
#[command(name = "spdelab", version, about = "Simulate stochastic heat and wave equations and check their regularity and convergence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dalang, (H1) and (H2) verdicts for a measure or family.
    Check(RunArgs),
    /// Ensemble of linear solutions with variance and covariance diagnostics.
    Simulate(RunArgs),
    /// Quasi-linear solutions by Picard iteration.
    Solve(RunArgs),
    /// Covariance and energy distances along a family.
    Converge(RunArgs),
    /// Increment moments and their uniformity over a family.
    Regularity(RunArgs),
    /// GRR functional and modulus check on sampled paths.
    Grr(RunArgs),
    /// List every violation in a config without running it.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides SPDELAB_OUT and the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

const VERDICT_FAILURE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn print_violations(path: &std::path::Path, v: &[String]) {
    for line in v {
        eprintln!("{}: {line}", path.display());
    }
}

fn execute(command: Command) -> Result<u8> {
    let (args, wanted) = match command {
        Command::Check(a) => (a, Some(Experiment::MeasureCheck)),
        Command::Simulate(a) => (a, Some(Experiment::SimulateLinear)),
        Command::Solve(a) => (a, Some(Experiment::Solve)),
        Command::Converge(a) => (a, Some(Experiment::Converge)),
        Command::Regularity(a) => (a, Some(Experiment::Regularity)),
        Command::Grr(a) => (a, Some(Experiment::Grr)),
        Command::Validate(a) => (a, None),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot configure the thread pool")?;
    }
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut cfg = match config::parse(&text) {
        Ok(c) => c,
        Err(v) => {
            print_violations(&args.config, &v);
            return Ok(1);
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let Some(wanted) = wanted else {
        return Ok(match config::prepare(cfg) {
            Ok(_) => {
                println!("{}: valid", args.config.display());
                0
            }
            Err(v) => {
                print_violations(&args.config, &v);
                1
            }
        });
    };
    if cfg.experiment != wanted {
        anyhow::bail!("config describes a {} experiment, not {}", cfg.experiment.name(), wanted.name());
    }
    let out = args
        .out
        .or_else(|| std::env::var_os("SPDELAB_OUT").map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let prepared = match config::prepare(cfg) {
        Ok(p) => p,
        Err(v) => {
            print_violations(&args.config, &v);
            return Ok(1);
        }
    };
    let mut sink = run::Sink::new(&out)?;
    let outcome = run::run(&prepared, &mut sink)?;
    sink.json("report.json", &outcome.report)?;
    let manifest = json!({
        "experiment": wanted.name(),
        "config": args.config.display().to_string(),
        "config_sha256": hex::encode(Sha256::digest(text.as_bytes())),
        "seed": prepared.config.seed,
        "threads": rayon::current_num_threads(),
        "versions": { "spdelab": spdelab::VERSION, "spdelab-cli": env!("CARGO_PKG_VERSION") },
        "started_unix": started_unix,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "outputs": sink.files,
        "verdict": if outcome.failures.is_empty() { "pass" } else { "fail" },
        "failures": outcome.failures,
    });
    sink.json("manifest.json", &manifest)?;
    for f in &outcome.failures {
        eprintln!("verdict: {f}");
    }
    println!("{} finished; artifacts in {}", wanted.name(), out.display());
    Ok(if outcome.failures.is_empty() { 0 } else { VERDICT_FAILURE })
}
