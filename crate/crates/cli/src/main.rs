//! `mzi-bench`: run, train and benchmark adaptive phase-estimation strategies.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{OneOrMany, PhaseSpec, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<mzi_phase::Error> for CliError {
    fn from(e: mzi_phase::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mzi-bench", version, about = "Adaptive single-photon phase estimation benchmarks")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. One is drawn and recorded when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "mzi-out")]
    out: PathBuf,
    /// Worker threads for batch runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One estimation run at a single phase.
    Estimate(RunArgs),
    /// Train an offline feedback policy with a particle swarm.
    TrainPolicy(TrainArgs),
    /// Batches over phases, strategies, channels and probe counts.
    Benchmark(RunArgs),
    /// Reshape records and tables into long-format plotting data.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// go, pgh, policy, inversion or bayes-fixed (comma separated).
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    /// Probe counts (comma separated).
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<usize>,
    /// Runs per phase.
    #[arg(long = "m")]
    m: Option<usize>,
    /// True phases (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phases: Vec<f64>,
    /// Evenly spread this many phases over the full circle instead.
    #[arg(long, conflicts_with = "phases")]
    phase_count: Option<usize>,
    /// ideal, depolarizing:P or phase:KAPPA (comma separated).
    #[arg(long, value_delimiter = ',')]
    channel: Vec<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    /// alternate or random.
    #[arg(long)]
    sign: Option<String>,
    /// real-part or pgh.
    #[arg(long)]
    fallback: Option<String>,
    /// Policy JSON for the policy strategy.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Update the posterior with the true noise model.
    #[arg(long)]
    noise_aware: bool,
    /// Prior support as LO,HI.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    prior_support: Vec<f64>,
    /// Write posterior snapshots (estimate).
    #[arg(long)]
    snapshots: bool,
    /// Write every run record (benchmark).
    #[arg(long)]
    records: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    swarm_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    neighborhood_radius: Option<usize>,
    #[arg(long)]
    fitness_samples: Option<usize>,
    #[arg(long)]
    velocity_clamp: Option<f64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// trajectory-estimate, trajectory-sigma, sigma-vs-n, loss-vs-n,
    /// mean-vs-phase, sigma-vs-phase or loss-vs-phase.
    #[arg(long)]
    figure: String,
    /// run_record.json, records.json, benchmark.csv or summary.csv files.
    inputs: Vec<PathBuf>,
}

fn base_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    Ok(config)
}

fn apply_run_args(config: &mut RunConfig, args: &RunArgs) -> Result<(), CliError> {
    if !args.strategy.is_empty() {
        config.strategy = Some(args.strategy.clone().into());
    }
    if !args.n.is_empty() {
        config.n = Some(args.n.clone().into());
    }
    if let Some(m) = args.m {
        config.m = m;
    }
    if !args.phases.is_empty() {
        config.phases = Some(match args.phases.as_slice() {
            [p] => PhaseSpec::Single(*p),
            ps => PhaseSpec::List(ps.to_vec()),
        });
    }
    if let Some(count) = args.phase_count {
        config.phases = Some(PhaseSpec::Even(config::EvenPhases {
            count,
            lo: 0.0,
            hi: std::f64::consts::TAU,
        }));
    }
    if !args.channel.is_empty() {
        config.channel = args.channel.clone().into();
    }
    if let Some(g) = args.grid_size {
        config.grid_size = g;
    }
    if let Some(s) = &args.sign {
        config.sign_convention = s.parse().map_err(|e| CliError::Config(format!("sign_convention: {e}")))?;
    }
    if let Some(f) = &args.fallback {
        config.go_fallback = f.parse().map_err(|e| CliError::Config(format!("go_fallback: {e}")))?;
    }
    if args.policy.is_some() {
        config.policy = args.policy.clone();
    }
    if args.noise_aware {
        config.noise_aware = true;
    }
    if let [lo, hi] = args.prior_support[..] {
        config.prior_support = Some([lo, hi]);
    }
    if args.snapshots {
        config.output.snapshots = true;
    }
    if args.records {
        config.output.records = true;
    }
    Ok(())
}

fn apply_train_args(config: &mut RunConfig, args: &TrainArgs) {
    if let Some(n) = args.n {
        config.n = Some(OneOrMany::One(n));
    }
    if let Some(c) = &args.channel {
        config.channel = OneOrMany::One(c.clone());
    }
    let p = &mut config.pso;
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut p.swarm_size, args.swarm_size);
    set(&mut p.iterations, args.iterations);
    set(&mut p.neighborhood_radius, args.neighborhood_radius);
    set(&mut p.fitness_samples, args.fitness_samples);
    let setf = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    setf(&mut p.omega, args.omega);
    setf(&mut p.beta1, args.beta1);
    setf(&mut p.alpha2, args.alpha2);
    setf(&mut p.velocity_clamp, args.velocity_clamp);
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::PlotData(args) = &cli.command {
        return plot::cmd_plot_data(&args.figure, &args.inputs, &cli.out);
    }

    let mut config = base_config(&cli)?;
    match &cli.command {
        Command::Estimate(args) | Command::Benchmark(args) => apply_run_args(&mut config, args)?,
        Command::TrainPolicy(args) => apply_train_args(&mut config, args),
        Command::PlotData(_) => unreachable!(),
    }
    config.validate_common()?;
    if config.seed.is_none() {
        config.seed = Some(rand::random());
    }
    if let Some(k) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }

    match &cli.command {
        Command::Estimate(_) => commands::cmd_estimate(&config, &cli.out),
        Command::TrainPolicy(_) => commands::cmd_train_policy(&config, &cli.out),
        Command::Benchmark(_) => commands::cmd_benchmark(&config, &cli.out),
        Command::PlotData(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
