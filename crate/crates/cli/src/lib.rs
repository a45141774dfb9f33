//! Command-line driver: configuration, orchestration and CSV output for
//! the spdelab experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use clap::{Parser, Subcommand};
use config::{parse_seed, ExperimentConfig, RawConfig};
use error::CliError;
use output::{write_report, Report};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "spdelab", version, about = "Stochastic heat equation laboratory")]
pub struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key, as section.key=value. Repeatable.
    #[arg(long = "set", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit nonzero when any acceptance gate fails.
    #[arg(long, global = true)]
    pub gated: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the uniqueness regime of the configured kernel and σ.
    Regime {
        /// Also tabulate an N×N grid of (α, γ).
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Compare the empirical noise covariance with dt·k(r).
    NoiseCheck,
    /// Run replicas and dump their snapshots.
    Simulate,
    /// Space and time regularity exponents from structure functions.
    Holder,
    /// Regularity of the difference of two solutions near its zero set.
    SmallValue,
    /// Divergence of solution pairs from perturbed initial data.
    Uniqueness,
    /// Yamada–Watanabe sequence and smoothing family.
    Yw {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "sqrt")]
        rho: String,
    },
    /// Quadrature checks of the Gaussian kernel estimates.
    Oracle {
        /// Also recompute the suprema behind the frozen constants.
        #[arg(long)]
        calibrate: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Regime { .. } => "regime",
            Command::NoiseCheck => "noise-check",
            Command::Simulate => "simulate",
            Command::Holder => "holder",
            Command::SmallValue => "small-value",
            Command::Uniqueness => "uniqueness",
            Command::Yw { .. } => "yw",
            Command::Oracle { .. } => "oracle",
        }
    }
}

/// Outcome of a run that completed its computation.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
    pub fingerprint: String,
}

fn raw_config(cli: &Cli) -> Result<RawConfig, CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for s in &cli.set {
        raw.set(s)?;
    }
    if let Some(seed) = &cli.seed {
        raw.insert("run.seed", parse_seed(seed)?);
    }
    if let Some(r) = cli.replicas {
        raw.insert("run.replicas", r);
    }
    if let Some(out) = &cli.out {
        raw.insert("run.out", out.display());
    }
    match &cli.command {
        Command::Yw { n, rho } => {
            raw.insert("yw.n", n);
            raw.insert("yw.rho", rho);
        }
        Command::Regime { sweep: Some(m) } => raw.insert("regime.sweep", m),
        _ => {}
    }
    Ok(raw)
}

/// Worker count from `SPDELAB_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("SPDELAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Parse(format!("SPDELAB_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs the subcommand, writes its artifacts and returns them. Failed gates
/// are reported through [`Outcome::report`]; `--gated` turns them into an
/// error in [`run_gated`].
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let raw = raw_config(cli)?;
    let cfg = ExperimentConfig::from_raw(raw)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Precondition(format!("thread pool: {e}")))?;
    let out = cfg.out.clone();
    let report = pool.install(|| match &cli.command {
        Command::Regime { sweep } => experiments::regime(&cfg, *sweep),
        Command::NoiseCheck => experiments::noise_check(&cfg),
        Command::Simulate => experiments::simulate(&cfg, &out),
        Command::Holder => experiments::holder(&cfg),
        Command::SmallValue => experiments::small_value(&cfg),
        Command::Uniqueness => experiments::uniqueness(&cfg),
        Command::Yw { n, rho } => experiments::yw(*n, rho),
        Command::Oracle { calibrate } => experiments::oracle(cfg.seed, *calibrate),
    })?;
    let files = write_report(&out, cli.command.name(), &cfg.fingerprint, spdelab::VERSION, &cfg.raw.canonical(), &report)?;
    Ok(Outcome { report, files, fingerprint: cfg.fingerprint })
}

pub fn run_gated(cli: &Cli) -> Result<Outcome, CliError> {
    let outcome = run(cli)?;
    let failed = outcome.report.failed_gates();
    if cli.gated && failed > 0 {
        return Err(CliError::GateFailed(failed));
    }
    Ok(outcome)
}
