//! `gridflux` command-line front end.
//!
//! Exit codes: 0 on success, 2 when a solver did not converge, 1 on any
//! input or I/O error (including usage errors).

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "gridflux", version, about = "Sparse AC power flow: differentiable, Newton-Raphson and DC solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one case and write the solution table and run metadata.
    Solve(SolveArgs),
    /// Solve one case with several methods and tabulate time against quality.
    Compare(CompareArgs),
    /// Solve several copies of one case as a single batched DPF problem.
    Batch(BatchArgs),
    /// Generate a seeded load time series and solve it with warm starts.
    Series(SeriesArgs),
    /// Run a benchmark suite described by a JSON file.
    Bench(BenchArgs),
    /// Write the compiled problem (Y_bus triplets, injections, bus sets).
    ExportProblem(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Dpf,
    Nr,
    Dc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dpf => "dpf",
            Self::Nr => "nr",
            Self::Dc => "dc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Flat,
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Plain,
}

/// Solver settings shared by the commands that run a single method.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// DPF hyperparameter preset (dpf-118, dpf-9241, ts-first, ts-warm).
    #[arg(long, default_value = "dpf-118")]
    pub preset: String,
    /// Initial state; NR defaults to the DC solution, DPF to flat.
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    /// Max-mismatch tolerance in p.u.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// MATPOWER case file.
    pub case: PathBuf,
    #[arg(long, value_enum, default_value = "dpf")]
    pub method: Method,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub case: PathBuf,
    /// Comma-separated methods, at least two.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dpf,nr,dc")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub case: PathBuf,
    /// Number of copies solved together.
    #[arg(long, default_value_t = 8)]
    pub copies: usize,
    #[arg(long, default_value = "dpf-118")]
    pub preset: String,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    pub case: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Relative per-step load perturbation bound.
    #[arg(long, default_value_t = 0.02)]
    pub amplitude: f64,
    #[arg(long, env = "GRIDFLUX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "ts-first")]
    pub preset_first: String,
    #[arg(long, default_value = "ts-warm")]
    pub preset_warm: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite file; grid paths inside it are relative to the file.
    #[arg(long)]
    pub suite: PathBuf,
    /// Output file; records go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub case: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command that ran to completion went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Batch(args) => commands::batch(&args),
        Command::Series(args) => commands::series(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::ExportProblem(args) => commands::export_problem(&args),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
