//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 training failure, 4 verification
//! failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::advtrain::InnerObjective;
use crate::attacks::{Mode, Solver};
use crate::dataset::ImputationMode;

pub use config::{Preset, RunConfig};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "LOADGUARD_OUT";

pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (model format 1, dataset manifest format 1)"
);

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn training(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_TRAINING,
            message: message.into(),
        }
    }

    pub fn verify(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VERIFY,
            message: message.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "loadguard", version = VERSION, about = "Train load forecasters, attack them exactly, and harden them")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (also settable through LOADGUARD_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Top-level seed for splitting, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for attacks and inner solves.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, clean, encode, split and scale a dataset.
    Prepare(PrepareArgs),
    /// Train a forecaster on a prepared dataset.
    Train(TrainArgs),
    /// Adversarially train a forecaster against availability attacks.
    Advtrain(AdvTrainArgs),
    /// Attack a trained model over a grid of budgets or radii.
    Attack(AttackArgs),
    /// Render plots and tables from attack results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Hourly load CSV.
    #[arg(long, conflicts_with = "synthetic")]
    pub csv: Option<PathBuf>,
    /// Generate this many synthetic rows instead of reading a CSV.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// TOML file mapping CSV headers to fields.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Fraction of rows used for training.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Where the prepared dataset is written.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Starting hyperparameters before any overrides.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Layer widths, e.g. 12,16,8,1.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Output model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdvTrainArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Inner-attack budget.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub impute: Option<ImputationMode>,
    /// Weight of the worst-case loss.
    #[arg(long)]
    pub bmax: Option<f64>,
    /// Weight of the best-case loss.
    #[arg(long)]
    pub bmin: Option<f64>,
    #[arg(long)]
    pub inner_solver: Option<Solver>,
    #[arg(long)]
    pub inner_objective: Option<InnerObjective>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// integrity or availability.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub impute: Option<ImputationMode>,
    /// Budgets: a single value, a list (1,3,5) or an inclusive range (1..6).
    #[arg(long)]
    pub beta: Option<String>,
    /// Radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub solver: Option<Solver>,
    /// Attack only the first N test samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Re-solve availability attacks by enumeration and fail on mismatch.
    #[arg(long)]
    pub oracle_check: bool,
    #[arg(long)]
    pub pgd_steps: Option<usize>,
    #[arg(long)]
    pub pgd_restarts: Option<usize>,
    #[arg(long)]
    pub pgd_step_size: Option<f64>,
    /// Directory for result tables.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Prepared dataset used for the MAPE table.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// NAME=PATH of a model to include in the MAPE table (repeatable).
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Directory for plots and tables.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
}

/// Parses budgets written as `4`, `1,3,5` or `1..6`.
pub fn parse_budgets(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("cannot parse budgets {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
