use serde::{Deserialize, Serialize};

use super::{AgentError, CellAgent};
use crate::env::{OperativeMode, Snapshot};

/// Always requests the same mode; used for baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedModeAgent(pub OperativeMode);

impl CellAgent for FixedModeAgent {
    type Obs = ();

    fn observe(&self, _snap: &Snapshot<'_>, _cell: usize) {}

    fn act(&mut self, _obs: &(), _explore: bool) -> OperativeMode {
        self.0
    }

    fn update(&mut self, _: (), _: OperativeMode, _: f64, _: (), _: bool) -> Result<Option<f64>, AgentError> {
        Ok(None)
    }

    fn epsilon(&self) -> f64 {
        0.0
    }

    fn set_epsilon(&mut self, _epsilon: f64) {}

    fn end_episode(&mut self, _episode: usize) {}
}
