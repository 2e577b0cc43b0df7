//! `poisson-approx`: batch runs of bound evaluations, family checks and simulations.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poisson_approx::Error;

use output::Format;

/// Exact laws, bound shapes and Poissonization checks for rare-event samples.
#[derive(Debug, Parser)]
#[command(name = "poisson-approx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one bound for one model file.
    Compute(ComputeArgs),
    /// Evaluate one bound over a seeded random family.
    Verify(VerifyArgs),
    /// Simulate the raw and Poissonized samples of one model.
    Simulate(SimulateArgs),
    /// Sandwich slack over a geometric grid of lambda values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// t0, lecam, cor1, t2, t3, t4, t5, t6 or bernstein.
    #[arg(long)]
    theorem: String,
    /// abs, square, unit or sqrt.
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    bound: BoundArgs,
    /// Monte-Carlo replications for the centering tail when it is not exact.
    #[arg(long, default_value_t = 20_000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    bound: BoundArgs,
    /// Number of family instances.
    #[arg(long, default_value_t = 200)]
    families: usize,
    /// degenerate, general or centered; defaults to the theorem's family.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 20_000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Model file; without it a random vector model of dimension `--dim` is used.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    /// Also run the Monte-Carlo sandwich for one-dimensional lattice models.
    #[arg(long)]
    mc: bool,
    /// Box as `lo:hi` per axis, comma separated.
    #[arg(long, requires = "region_b", allow_hyphen_values = true)]
    region_a: Option<String>,
    #[arg(long, requires = "region_a", allow_hyphen_values = true)]
    region_b: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Instances of the degenerate family when no model is given.
    #[arg(long, default_value_t = 20)]
    families: usize,
    /// Smallest lambda of the grid.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(Error::NumericalCorruption { .. }) => 2,
            CliError::Core(Error::SupportOverflow { .. } | Error::TooLarge(_)) => 3,
            CliError::Core(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("POISSON_APPROX_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("POISSON_APPROX_THREADS: `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("POISSON_APPROX_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Compute(a) => commands::compute(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
