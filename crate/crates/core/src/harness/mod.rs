//! Experiment orchestration: training runs, frozen-policy evaluation,
//! metrics files and the cost model.

mod config;
mod cost;
mod evaluate;
mod train;

use std::path::PathBuf;

pub use config::{AgentKind, BoundSection, ExperimentConfig, Seeds};
pub use cost::{cost_analysis, report_row, CostBreakdown, CostParams, ReportInput, ReportRow, REPORT_HEADER};
pub use evaluate::{evaluate, grid_connected, EvalSummary, ModeShares};
pub use train::{
    load_traces, read_bundle, train, train_to_dir, write_bundle, AgentBundle, EpisodeSummary, MetricsRecord,
    TrainOutcome, BUNDLE_FILE, EPISODES_FILE, METRICS_FILE,
};

use crate::agents::AgentError;
use crate::bound::BoundError;
use crate::env::EnvError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("training failed in episode {episode}, step {step}: {source}")]
    Training { episode: usize, step: usize, source: AgentError },
    #[error("{0} already exists; pass force to overwrite")]
    Exists(PathBuf),
    #[error("bundle does not match the environment: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
