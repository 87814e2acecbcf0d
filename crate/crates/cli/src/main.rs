//! `egbo`: benchmark grids, single optimisation runs, the session service
//! and replay of saved runs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod bench;
mod replay;
mod run;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use egbo::Behavior;

/// Version written into every output file.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(name = "egbo", version, about = "Expert-guided Bayesian optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid of (function, behaviour, repeat) cells and write regret tables.
    Benchmark(BenchArgs),
    /// Optimise one function with one simulated practitioner.
    Run(RunArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
    /// Re-run a saved trace or session and check it reproduces exactly.
    Replay(ReplayArgs),
}

/// Loop settings shared by `benchmark` and `run`.
#[derive(Args, Clone)]
pub struct LoopArgs {
    /// Total evaluations including the initial design.
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    /// Choices shown per iteration.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    /// Size of the Latin-hypercube initial design.
    #[arg(long, default_value_t = 4)]
    pub init: usize,
    /// UCB exploration weight.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl LoopArgs {
    pub fn config(&self) -> egbo::LoopConfig {
        let mut cfg = egbo::LoopConfig {
            p: self.p,
            init_points: self.init,
            max_evaluations: self.budget,
            seed: self.seed,
            ..egbo::LoopConfig::default()
        };
        cfg.utility.beta = self.beta;
        cfg
    }
}

/// Settings for sampled GP functions.
#[derive(Args, Clone)]
pub struct GpArgs {
    /// Lengthscale of sampled GP functions.
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// Sample GP functions on [0, 1] with lengthscale 0.04 instead of [0, 10] with 0.3.
    #[arg(long)]
    pub unit_box: bool,
}

impl GpArgs {
    pub fn settings(&self) -> egbo::benchmark::GpSuiteSettings {
        let mut s = if self.unit_box {
            egbo::benchmark::GpSuiteSettings::unit_box()
        } else {
            egbo::benchmark::GpSuiteSettings::default()
        };
        if let Some(l) = self.lengthscale {
            s.lengthscale = l;
        }
        s
    }
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated suites: `<N>d-gp` or `standard`.
    #[arg(long, value_delimiter = ',', default_value = "1d-gp")]
    pub suite: Vec<String>,
    /// Functions per GP suite (default 10, or 50 with --full).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "expert,trusting,adversarial,pbest:0.5,pbest:0.25")]
    pub behaviors: Vec<Behavior>,
    /// Repeats per (function, behaviour) (default 4, or 16 with --full).
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Paper-scale grid: 50 functions, 16 repeats, 10D standard functions.
    #[arg(long)]
    pub full: bool,
    /// Output directory for results.csv, results.json and plot.json.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[command(flatten)]
    pub gp: GpArgs,
    #[command(flatten)]
    pub loop_args: LoopArgs,
}

#[derive(Args)]
pub struct RunArgs {
    /// A standard function name (ackley, griewank, rastrigin, rosenbrock, powell) or `gp`.
    #[arg(long)]
    pub function: String,
    #[arg(long = "dim", alias = "dimension", default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value = "trusting")]
    pub behavior: Behavior,
    /// Trace file to write.
    #[arg(long, default_value = "trace.json")]
    pub out: PathBuf,
    /// Write every Pareto front as JSON lines to this file.
    #[arg(long)]
    pub dump_fronts: Option<PathBuf>,
    /// Do not print per-iteration choices.
    #[arg(long, short)]
    pub quiet: bool,
    #[command(flatten)]
    pub gp: GpArgs,
    #[command(flatten)]
    pub loop_args: LoopArgs,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, env = "EGBO_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "EGBO_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Directory holding one JSON document per session.
    #[arg(long, env = "EGBO_DATA", default_value = "sessions")]
    pub data: PathBuf,
    /// Master seed for sessions created without an explicit seed.
    #[arg(long, env = "EGBO_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// A trace written by `run`, a session document or a loop document.
    pub file: PathBuf,
    /// Write a JSON replay report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Benchmark(args) => bench::execute(args),
        Command::Run(args) => run::execute(args),
        Command::Serve(args) => serve::execute(args),
        Command::Replay(args) => replay::execute(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
