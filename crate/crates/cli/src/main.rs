mod commands;
mod config;
mod output;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Exit status for a comparison that did not produce a strict verdict.
pub const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] remest::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 2,
            CliError::Core(e) if e.is_non_convergence() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "remest",
    version,
    about = "Scheduling and coding policies for remote estimation over a perfect and a noisy channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the one-stage problem with per-use channel prices.
    SolveSoft(SolveSoftArgs),
    /// Solve the finite-horizon problem with channel budgets.
    SolveDp(SolveDpArgs),
    /// Optimal cost as one budget varies, for several values of the other.
    Sweep(SweepArgs),
    /// Roll out the optimal policy and write a sample path.
    Simulate(SimulateArgs),
    /// Compare a threshold policy with its shifted-region counterpart.
    Counterexample(CounterexampleArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (stdout if omitted).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SourceArgs {
    /// Source density: laplace, uniform, or tabulated (table given in the config).
    #[arg(long)]
    pub density: Option<String>,
    /// Laplace rate.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Uniform half-width.
    #[arg(long = "L", allow_negative_numbers = true)]
    pub half_width: Option<f64>,
    /// Noisy-channel SNR.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BudgetArgs {
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    /// Noisy-channel opportunities.
    #[arg(long = "N1")]
    pub n1: Option<usize>,
    /// Perfect-channel opportunities.
    #[arg(long = "N2")]
    pub n2: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolveSoftArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Noisy-channel price.
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    /// Perfect-channel price.
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    /// Fall back to a grid search if the iterative solver stalls.
    #[arg(long)]
    pub grid_fallback: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolveDpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub budgets: BudgetArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    /// Budget to sweep: N1 or N2.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated values of the other budget.
    #[arg(long, value_delimiter = ',')]
    pub fixed: Option<Vec<usize>>,
    /// Largest value of the swept budget.
    #[arg(long)]
    pub max: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub budgets: BudgetArgs,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo episodes for the summary statistics.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Channel noise shape: gaussian, uniform or laplace.
    #[arg(long)]
    pub noise: Option<String>,
    /// Transmit power.
    #[arg(long, allow_negative_numbers = true)]
    pub power: Option<f64>,
    /// Also write the summary JSON here.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Uniform half-width.
    #[arg(long = "L", allow_negative_numbers = true)]
    pub half_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Compare the policy with itself instead of the shifted one.
    #[arg(long)]
    pub null_shift: bool,
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::SolveSoft(a) => commands::solve_soft(&a),
        Command::SolveDp(a) => commands::solve_dp(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Counterexample(a) => commands::counterexample(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
