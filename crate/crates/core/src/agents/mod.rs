//! Per-cell decision makers.
//!
//! Every agent implements [`CellAgent`]: it builds its own observation
//! from a network [`Snapshot`], picks an ε-greedy mode, and learns from
//! the shared reward.

mod ddrl;
mod fixed;
mod replay;
mod tabular;

use serde::{Deserialize, Serialize};

use crate::env::{OperativeMode, Snapshot};
use crate::nn::NnError;

pub use ddrl::{DdrlAgent, DdrlConfig};
pub use fixed::FixedModeAgent;
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{quantize, QRow, StateKey, TabularConfig, TabularQAgent};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("observation has length {got}, agent expects {expected}")]
    Observation { expected: usize, got: usize },
    #[error("Q-table row {line}: {msg}")]
    QTable { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub trait CellAgent {
    type Obs: Clone;

    fn observe(&self, snap: &Snapshot<'_>, cell: usize) -> Self::Obs;

    /// ε-greedy when `explore`, greedy otherwise.
    fn act(&mut self, obs: &Self::Obs, explore: bool) -> OperativeMode;

    /// Feeds one transition; returns the training loss when a learning
    /// step ran.
    fn update(
        &mut self,
        obs: Self::Obs,
        action: OperativeMode,
        reward: f64,
        next_obs: Self::Obs,
        terminal: bool,
    ) -> Result<Option<f64>, AgentError>;

    fn epsilon(&self) -> f64;

    fn set_epsilon(&mut self, epsilon: f64);

    /// Called after episode `episode` (0-based) finishes.
    fn end_episode(&mut self, episode: usize);
}

/// Multiplicative per-episode exploration decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    pub min: f64,
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<(), AgentError> {
        let ok =
            (0.0..=1.0).contains(&self.initial) && (0.0..=1.0).contains(&self.decay) && (0.0..=1.0).contains(&self.min);
        if ok {
            Ok(())
        } else {
            Err(AgentError::Config(format!("epsilon schedule out of [0, 1]: {self:?}")))
        }
    }

    /// ε used during episode `episode`.
    pub fn at(&self, episode: usize) -> f64 {
        let e = self.initial * self.decay.powi(episode.min(i32::MAX as usize) as i32);
        e.max(self.min).min(1.0)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }

    #[test]
    fn epsilon_schedule() {
        let s = EpsilonSchedule { initial: 0.9, decay: 0.9, min: 0.0 };
        assert_eq!(s.at(0), 0.9);
        assert!((s.at(1) - 0.81).abs() < 1e-15);
        let floored = EpsilonSchedule { min: 0.05, ..s };
        assert_eq!(floored.at(10_000), 0.05);
        let mut prev = 1.0;
        for k in 0..200 {
            let e = floored.at(k);
            assert!(e <= prev && (0.05..=0.9).contains(&e));
            prev = e;
        }
    }
}
