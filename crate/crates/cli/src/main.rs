//! `sqlab`: runs one experiment, writes its outputs and exits with
//! 0 (pass), 2 (criterion failure), 3 (config error) or 4 (numeric guard).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqlab_core::experiments::{exit, exit_code, run_command, Command, ExperimentConfig};
use sqlab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "sqlab", version, about = "exp(Phi)_2 stochastic quantization experiments on the 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Level-to-level Cauchy decay of the Wick exponential (needs wick.N >= 3).
    WickConverge(Common),
    /// Full cutoff SQE across levels, plus the splitting residual order.
    Sqe(Common),
    /// Stationarity of the cutoff Gibbs measure under the projected dynamics.
    Invariance(Common),
    /// Besov/Sobolev equivalence constants and heat-semigroup bounds.
    NormsBench(Common),
    /// Free-field samples with a binary coefficient dump.
    SampleGff(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `out/<command>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
    /// Override any config key, e.g. `--set wick.N=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Cmd {
    fn split(&self) -> (Command, &Common) {
        match self {
            Cmd::WickConverge(c) => (Command::WickConverge, c),
            Cmd::Sqe(c) => (Command::Sqe, c),
            Cmd::Invariance(c) => (Command::Invariance, c),
            Cmd::NormsBench(c) => (Command::NormsBench, c),
            Cmd::SampleGff(c) => (Command::SampleGff, c),
        }
    }
}

/// Defaults, then the file, then `--set`, then the dedicated flags.
fn build_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(r) = common.replicas {
        if r == 0 {
            return Err(Error::Config("--replicas must be positive".into()));
        }
        cfg.replicas = Some(r);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command, common: &Common) -> Result<i32, Error> {
    let cfg = build_config(common)?;
    let outcome = match common.threads {
        Some(0) => return Err(Error::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_command(command, &cfg))?,
        None => run_command(command, &cfg)?,
    };
    let dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    outcome.write(&dir)?;
    for c in outcome.report.criteria() {
        println!("{}", c.line());
    }
    println!("wrote {}", dir.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG_ERROR as u8 } else { 0 });
        }
    };
    let (command, common) = cli.command.split();
    let code = match run(command, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sqlab {}: {e}", command.name());
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
