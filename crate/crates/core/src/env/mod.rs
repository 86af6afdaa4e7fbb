//! Two-tier network environment: energy-harvesting small cells that
//! offload baseband work to a grid-powered macro site.

mod battery;
mod config;
mod mode;
mod network;
pub mod power;
pub mod traces;

pub use battery::{BatteryGrid, BatteryParams};
pub use config::{CyclicEncoding, EnvConfig, MbsLoadMode, SolarParams, TrafficProfile};
pub use mode::OperativeMode;
pub use network::{
    build_observation, load_norm, mbs_load_norm, mode_energy_kwh, slot_metrics, step, step_with, weighted_cost,
    BatteryDynamics, Environment, NetworkState, SlotMetrics, Snapshot, StepOutcome,
};
pub use power::{drop_rate, mbs_grid_power, p_max, vsc_power, PowerModelParams};
pub use traces::{generate_traces, TraceSet};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("step {step} out of range for episode of {len} slots")]
    OutOfRange { step: usize, len: usize },
    #[error("trace schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
