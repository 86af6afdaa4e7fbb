use serde::{Deserialize, Serialize};

use super::{Dense, DenseNet, Gradients, NnError};

/// When the learning-rate decay counter advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    PerEpisode,
    PerUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_decay: f64,
    pub schedule: LrSchedule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, momentum: 0.9, lr_decay: 0.01, schedule: LrSchedule::PerEpisode }
    }
}

/// SGD with classical momentum: `v <- mu * v - lr * g; theta <- theta + v`,
/// with `lr = lr0 / (1 + decay * k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdMomentum {
    pub config: OptimizerConfig,
    velocity: Vec<Dense>,
    update_count: u64,
    episodes_completed: u64,
}

impl SgdMomentum {
    pub fn new(config: &OptimizerConfig, net: &DenseNet) -> Self {
        Self {
            config: config.clone(),
            velocity: net.layers().iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect(),
            update_count: 0,
            episodes_completed: 0,
        }
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn episodes_completed(&self) -> u64 {
        self.episodes_completed
    }

    pub fn end_episode(&mut self) {
        self.episodes_completed += 1;
    }

    pub fn effective_lr(&self) -> f64 {
        let k = match self.config.schedule {
            LrSchedule::PerEpisode => self.episodes_completed,
            LrSchedule::PerUpdate => self.update_count,
        };
        self.config.learning_rate / (1.0 + self.config.lr_decay * k as f64)
    }

    pub(super) fn check_shape(&self, net: &DenseNet) -> Result<(), NnError> {
        let same = self.velocity.len() == net.layers().len()
            && self
                .velocity
                .iter()
                .zip(net.layers())
                .all(|(v, l)| v.weights.dim() == l.weights.dim() && v.bias.len() == l.bias.len());
        if same {
            Ok(())
        } else {
            Err(NnError::OptimizerShape)
        }
    }

    pub fn apply(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<(), NnError> {
        self.check_shape(net)?;
        let lr = self.effective_lr();
        let mu = self.config.momentum;
        for ((v, g), layer) in self.velocity.iter_mut().zip(&grads.layers).zip(net.layers_mut()) {
            ndarray::Zip::from(&mut v.weights).and(&g.weights).and(&mut layer.weights).for_each(|v, &g, w| {
                *v = mu * *v - lr * g;
                *w += *v;
            });
            ndarray::Zip::from(&mut v.bias).and(&g.bias).and(&mut layer.bias).for_each(|v, &g, b| {
                *v = mu * *v - lr * g;
                *b += *v;
            });
        }
        self.update_count += 1;
        Ok(())
    }
}
