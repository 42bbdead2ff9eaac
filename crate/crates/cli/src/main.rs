//! `tangle`: run tangle ledger simulations and compare them with the fluid
//! limit and the stationary prediction.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime or numeric error,
//! 3 IO error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tangle_fluid::stationary::DEFAULT_TOLERANCE;
use tangle_fluid::ArrivalProcess;

use crate::config::{delay_from_flags, ExperimentConfig, Overrides, SEED_ENV};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tangle", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ensemble: ensemble.csv, optional run_<k>.csv, summary.json
    Simulate(RunArgs),
    /// Fluid-limit PDE solve: fluid.csv
    Fluid(RunArgs),
    /// Equilibrium tip count from the stationary equation
    Stationary(StationaryArgs),
    /// All three pipelines on one config: report.json and compare.csv
    Compare(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Arrival {
    Poisson,
    Deterministic,
}

impl From<Arrival> for ArrivalProcess {
    fn from(a: Arrival) -> Self {
        match a {
            Arrival::Poisson => ArrivalProcess::Poisson,
            Arrival::Deterministic => ArrivalProcess::Deterministic,
        }
    }
}

#[derive(Args)]
struct DelayArgs {
    /// Delay law: fixed, exponential or uniform
    #[arg(long = "type", value_name = "LAW")]
    kind: Option<String>,
    /// Fixed delay
    #[arg(long)]
    h: Option<f64>,
    /// Exponential rate
    #[arg(long)]
    mu: Option<f64>,
    /// Uniform lower bound
    #[arg(long)]
    h0: Option<f64>,
    /// Uniform upper bound
    #[arg(long)]
    h1: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; falls back to the config file, then TANGLE_SEED, then 1
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    arrival: Option<Arrival>,
    /// Fluid step size
    #[arg(long)]
    step: Option<f64>,
    /// Stationary solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    delay: DelayArgs,
}

#[derive(Args)]
struct StationaryArgs {
    /// JSON experiment config supplying defaults for the flags below
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    delay: DelayArgs,
}

impl DelayArgs {
    fn model(&self) -> Result<Option<tangle_fluid::DelayModel>, CliError> {
        delay_from_flags(self.kind.as_deref(), self.h, self.mu, self.h0, self.h1)
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let overrides = Overrides {
            seed: self.seed,
            n_runs: self.runs,
            lambda: self.lambda,
            horizon: self.horizon,
            output_dir: self.out.clone(),
            arrival: self.arrival.map(Into::into),
            delay: self.delay.model()?,
            fluid_step: self.step,
            stationary_tol: self.tol,
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        ExperimentConfig::resolve(self.config.as_deref(), &overrides, env_seed.as_deref())
    }
}

fn stationary(args: &StationaryArgs) -> Result<(), CliError> {
    let file = args
        .config
        .as_deref()
        .map(ExperimentConfig::load)
        .transpose()?;
    let delay = match (args.delay.model()?, &file) {
        (Some(d), _) => d,
        (None, Some(c)) => c.delay,
        (None, None) => return Err(CliError::Config("give --type or --config".into())),
    };
    let lambda = args
        .lambda
        .or(file.as_ref().map(|c| c.lambda))
        .ok_or_else(|| CliError::Config("give --lambda or --config".into()))?;
    let tol = args
        .tol
        .or(file.as_ref().map(|c| c.stationary_tol))
        .unwrap_or(DEFAULT_TOLERANCE);
    commands::stationary(&delay, lambda, tol).map(|_| ())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args.resolve()?).map(|_| ()),
        Command::Fluid(args) => commands::fluid(&args.resolve()?).map(|_| ()),
        Command::Stationary(args) => stationary(&args),
        Command::Compare(args) => commands::compare(&args.resolve()?).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as config errors; --help and --version succeed
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
