//! `inekf`: simulate walking logs, run a filter over them, or benchmark both
//! filters from randomized initial conditions.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use inekf_core::config::ExperimentConfig;
use inekf_core::error::{ConfigError, DataError, FilterError, HarnessError};
use inekf_core::gait::simulate;
use inekf_core::harness::{monte_carlo, run_filter, MeasurementMode, MonteCarloScenario, RunOptions};
use inekf_core::io;
use inekf_core::rng::{derive_seed, stream};
use inekf_core::state::initial_state;
use inekf_core::{FilterKind, Integrator};

const DEFAULT_SEED: u64 = 42;
const DEFAULT_BENCHMARK_STEPS: usize = 10;

#[derive(Parser)]
#[command(name = "inekf", version, about = "Invariant EKF vs quaternion EKF for bipedal base estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth and noisy IMU / leg-kinematics logs.
    Simulate(SimulateArgs),
    /// Run one filter (or both) over logs and report per-channel errors.
    Run(RunArgs),
    /// Monte-Carlo study over randomized initial estimates.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Existing output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; every random stream derives from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Number of steps to walk.
    #[arg(long)]
    steps: Option<usize>,
    /// Heading change per step, rad.
    #[arg(long)]
    turn: Option<f64>,
    /// Disable all sensor noise.
    #[arg(long)]
    noise_free: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterChoice {
    Riekf,
    Qekf,
    Both,
}

impl FilterChoice {
    fn kinds(self) -> Vec<FilterKind> {
        match self {
            FilterChoice::Riekf => vec![FilterKind::Riekf],
            FilterChoice::Qekf => vec![FilterKind::Qekf],
            FilterChoice::Both => FilterKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorChoice {
    ClosedForm,
    Euler,
}

impl From<IntegratorChoice> for Integrator {
    fn from(c: IntegratorChoice) -> Self {
        match c {
            IntegratorChoice::ClosedForm => Integrator::ClosedForm,
            IntegratorChoice::Euler => Integrator::Euler,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "riekf")]
    filter: FilterChoice,
    /// Directory holding truth.csv, imu.csv and kin.csv.
    #[arg(long = "in")]
    input: PathBuf,
    /// Start from a random initial estimate instead of the true state.
    #[arg(long)]
    perturb: bool,
    #[arg(long, value_enum, default_value = "closed-form")]
    integrator: IntegratorChoice,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, default_value = "both")]
    filters: FilterChoice,
    /// Use logs from this directory instead of simulating them.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Number of steps of the simulated scenario (overrides `n_steps`).
    #[arg(long, default_value_t = DEFAULT_BENCHMARK_STEPS)]
    steps: usize,
    /// Draw fresh measurement noise for every trial.
    #[arg(long)]
    per_trial_noise: bool,
    #[arg(long, value_enum, default_value = "closed-form")]
    integrator: IntegratorChoice,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<FilterError> for Failure {
    fn from(e: FilterError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Filter(f) => f.into(),
            HarnessError::Config(c) => c.into(),
            other @ (HarnessError::EmptyLog | HarnessError::Misaligned(_)) => Failure::Data(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => ExperimentConfig::from_config_file(p)
            .map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => Ok(ExperimentConfig::default()),
    }
}

fn check_out_dir(dir: &Path) -> Result<(), Failure> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Config(format!("output directory {} does not exist", dir.display())))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.common.config.as_deref())?;
    check_out_dir(&args.common.out)?;
    if let Some(n) = args.steps {
        cfg.gait.n_steps = n;
    }
    if let Some(t) = args.turn {
        cfg.gait.turn_per_step = t;
    }
    if args.noise_free {
        cfg.sim_noise = inekf_core::gait::SimNoise::zero();
    }
    cfg.gait.rng_seed = args.common.seed;
    cfg.validate()?;
    let logs = simulate(&cfg.gait, &cfg.sim_noise, &cfg.sim_bias)?;
    io::write_logs(&args.common.out, &logs)?;
    println!(
        "duration {:.3} s, steps {}, samples {}, average speed {:.4} m/s ({:.3} km/h), final heading {:.4} rad",
        logs.duration(),
        cfg.gait.n_steps,
        logs.truth.len(),
        logs.average_speed(),
        logs.average_speed() * 3.6,
        logs.truth.last().map_or(0.0, |r| r.yaw()),
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args.common.config.as_deref())?;
    check_out_dir(&args.common.out)?;
    let logs = io::read_logs(&args.input)?;
    let truth0 = logs
        .truth
        .first()
        .map(|r| r.to_robot_state(logs.bias))
        .ok_or_else(|| Failure::Data("empty log".into()))?;
    let init = if args.perturb {
        initial_state(&cfg.noise, &truth0, derive_seed(args.common.seed, stream::INIT, 0), true).0
    } else {
        truth0
    };
    let opts = RunOptions {
        integrator: args.integrator.into(),
        criteria: cfg.criteria.clone(),
        ..RunOptions::default()
    };
    let mut runs = Vec::new();
    for kind in args.filter.kinds() {
        let run = run_filter(kind, &logs, &cfg.noise, &init, &opts)?;
        if !run.health.is_healthy() {
            return Err(Failure::Numerical(format!("{kind}: numerical health check failed: {:?}", run.health)));
        }
        runs.push(run);
    }
    let out = &args.common.out;
    for run in &runs {
        io::write_estimates(&out.join(io::estimate_file(run.kind)), &run.times, &run.estimates)?;
        io::write_run_metrics(&out.join(io::mse_file(run.kind)), run)?;
    }
    let summary = io::run_summary(&runs, &cfg.criteria);
    if runs.len() > 1 {
        io::write_text(&out.join(io::SUMMARY_FILE), &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.common.config.as_deref())?;
    check_out_dir(&args.common.out)?;
    if args.trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    cfg.gait.n_steps = args.steps;
    cfg.gait.rng_seed = args.common.seed;
    cfg.validate()?;
    let logs = match &args.input {
        Some(dir) => io::read_logs(dir)?,
        None => simulate(&cfg.gait, &cfg.sim_noise, &cfg.sim_bias)?,
    };
    if args.per_trial_noise && args.input.is_some() {
        return Err(Failure::Config("--per-trial-noise requires simulated logs (omit --in)".into()));
    }
    let mode = if args.per_trial_noise {
        MeasurementMode::PerTrial {
            gait: cfg.gait,
            noise: cfg.sim_noise,
        }
    } else {
        MeasurementMode::Shared
    };
    let scenario = MonteCarloScenario {
        logs,
        params: cfg.noise,
        options: RunOptions {
            integrator: args.integrator.into(),
            criteria: cfg.criteria.clone(),
            keep_estimates: false,
            ..RunOptions::default()
        },
        mode,
    };
    let mut results = Vec::new();
    for kind in args.filters.kinds() {
        let mc = monte_carlo(kind, args.trials, &scenario, args.common.seed)?;
        if mc.health.non_finite {
            return Err(Failure::Numerical(format!("{kind}: non-finite values during the benchmark")));
        }
        results.push(mc);
    }
    let out = &args.common.out;
    for mc in &results {
        io::write_trials(&out.join(io::trials_file(mc.kind)), mc)?;
    }
    io::write_distribution(&out.join(io::DISTRIBUTION_FILE), &results)?;
    let summary = io::benchmark_summary(&results, &cfg.criteria);
    io::write_text(&out.join(io::SUMMARY_FILE), &summary)?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
