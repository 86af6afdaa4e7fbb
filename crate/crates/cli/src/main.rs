//! `splitctl`: generate traces, train and evaluate controllers, solve the
//! offline bound and tabulate costs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("invalid input: {0}")]
    Schema(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Schema(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "splitctl", version, about = "Functional-split control for energy-harvesting small cells")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML experiment config; built-in defaults when absent.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dotted override such as `env.battery.capacity=3.0`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize harvest and load traces to traces.csv.
    GenTraces {
        #[command(flatten)]
        common: Common,
        /// Trace seed (default: seeds.trace_seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train agents; writes metrics.jsonl, episodes.csv, checkpoint.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Agent seed (default: seeds.agent_seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy one-year rollout of a checkpoint on the training traces.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// checkpoint.json written by `train`.
        #[arg(long, required_unless_present = "grid_connected")]
        checkpoint: Option<PathBuf>,
        /// Exploration rate during the rollout.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Snap batteries to the bound's grid after every slot.
        #[arg(long)]
        quantized: bool,
        /// Evaluate the all-grid reference network instead of a checkpoint.
        #[arg(long, conflicts_with = "checkpoint")]
        grid_connected: bool,
    },
    /// Rollout with `validation_epsilon` on traces from `validation_trace_seed`.
    Validate {
        #[command(flatten)]
        common: Common,
        /// checkpoint.json written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Solve the offline DP bound; writes dp_policy.csv and dp_summary.json.
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// CAPEX/OPEX for one run summary; writes cost.csv.
    Cost {
        #[command(flatten)]
        common: Common,
        /// Summary JSON from `evaluate`, `validate` or `bound`.
        #[arg(long)]
        summary: PathBuf,
        /// Treat the run as grid-connected (no panels or batteries).
        #[arg(long)]
        grid_connected: bool,
    },
    /// Comparison table over several run summaries; writes report.csv.
    Report {
        #[command(flatten)]
        common: Common,
        /// Summary JSON files, one report row each.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::GenTraces { common, seed } => commands::gen_traces(&common, seed),
        Command::Train { common, seed } => commands::train(&common, seed),
        Command::Evaluate { common, checkpoint, epsilon, quantized, grid_connected } => {
            commands::evaluate(&common, checkpoint.as_deref(), epsilon, quantized, grid_connected)
        }
        Command::Validate { common, checkpoint } => commands::validate(&common, &checkpoint),
        Command::Bound { common } => commands::bound(&common),
        Command::Cost { common, summary, grid_connected } => commands::cost(&common, &summary, grid_connected),
        Command::Report { common, summaries } => commands::report(&common, &summaries),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splitctl: {e}");
            ExitCode::from(e.code())
        }
    }
}
