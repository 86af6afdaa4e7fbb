use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{CostParams, HarnessError};
use crate::agents::{DdrlConfig, TabularConfig};
use crate::env::EnvConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ddrl,
    Tabular,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ddrl => "ddrl",
            AgentKind::Tabular => "tabular",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub trace_seed: u64,
    pub agent_seed: u64,
    pub validation_trace_seed: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { trace_seed: 1, agent_seed: 7, validation_trace_seed: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub battery_bins: usize,
    /// Steps; 0 means the full episode.
    pub horizon: usize,
    /// Write every (step, state) policy entry instead of the optimal
    /// trajectory only.
    pub full_policy: bool,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self { battery_bins: 21, horizon: 0, full_policy: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentKind,
    pub ddrl: DdrlConfig,
    pub tabular: TabularConfig,
    pub episodes: usize,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    /// Carry battery levels over between training episodes.
    pub persist_batteries: bool,
    /// Load traces from this CSV instead of synthesizing them.
    pub trace_file: Option<PathBuf>,
    pub validation_epsilon: f64,
    pub bound: BoundSection,
    pub cost: CostParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent: AgentKind::Ddrl,
            ddrl: DdrlConfig::default(),
            tabular: TabularConfig::default(),
            episodes: 45,
            seeds: Seeds::default(),
            output_dir: PathBuf::from("runs/default"),
            persist_batteries: false,
            trace_file: None,
            validation_epsilon: 0.05,
            bound: BoundSection::default(),
            cost: CostParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.env.validate()?;
        self.ddrl.validate()?;
        self.tabular.validate()?;
        self.cost.validate()?;
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be at least 1".into()));
        }
        if self.seeds.validation_trace_seed == self.seeds.trace_seed {
            return Err(HarnessError::Config("validation_trace_seed must differ from trace_seed".into()));
        }
        if !(0.0..=1.0).contains(&self.validation_epsilon) {
            return Err(HarnessError::Config(format!("validation_epsilon {} outside [0, 1]", self.validation_epsilon)));
        }
        if self.bound.battery_bins < 2 {
            return Err(HarnessError::Config("bound.battery_bins must be >= 2".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn equal_trace_seeds_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.validation_trace_seed = cfg.seeds.trace_seed;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"episodes": 3, "epsiodes": 4}"#);
        assert!(err.is_err());
        let nested = serde_json::from_str::<ExperimentConfig>(r#"{"env": {"battery": {"capacty": 3.0}}}"#);
        assert!(nested.is_err());
        let ok: ExperimentConfig = serde_json::from_str(r#"{"agent": "tabular", "env": {"n_cells": 2}}"#).unwrap();
        assert_eq!(ok.agent, AgentKind::Tabular);
        assert_eq!(ok.env.n_cells, 2);
        assert_eq!(ok.episodes, 45);
    }
}
