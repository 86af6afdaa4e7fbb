use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, AgentError, CellAgent, EpsilonSchedule, ReplayBuffer, Transition};
use crate::env::{OperativeMode, Snapshot};
use crate::nn::{train_step, DenseNet, NetCheckpoint, OptimizerConfig, Sample, SgdMomentum, WeightInit};
use crate::rng::{agent_stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdrlConfig {
    pub gamma: f64,
    pub eps_initial: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
    pub minibatch: usize,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub init: WeightInit,
    pub optimizer: OptimizerConfig,
}

impl Default for DdrlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            eps_initial: 0.9,
            eps_decay: 0.9,
            eps_min: 0.0,
            minibatch: 32,
            replay_capacity: 2000,
            hidden: vec![256, 128, 64],
            init: WeightInit::GlorotUniform,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl DdrlConfig {
    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule { initial: self.eps_initial, decay: self.eps_decay, min: self.eps_min }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if self.minibatch == 0 || self.replay_capacity < self.minibatch {
            return Err(AgentError::Config("need 0 < minibatch <= replay_capacity".into()));
        }
        if self.hidden.contains(&0) {
            return Err(AgentError::Config("hidden layer sizes must be positive".into()));
        }
        self.schedule().validate()
    }

    pub fn layer_sizes(&self, input: usize) -> Vec<usize> {
        std::iter::once(input).chain(self.hidden.iter().copied()).chain([OperativeMode::COUNT]).collect()
    }
}

/// DQN agent for one cell: its own Q-network, replay memory and
/// exploration stream. Targets come from the same network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdrlAgent {
    pub config: DdrlConfig,
    model: NetCheckpoint,
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    epsilon: f64,
}

impl DdrlAgent {
    /// Agent `index` with streams derived from `seed`.
    pub fn new(config: DdrlConfig, input_size: usize, seed: u64, index: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let mut init_rng = agent_stream(seed, index, Stream::NetInit);
        let net = DenseNet::init_with(&config.layer_sizes(input_size), config.init, &mut init_rng)?;
        let optimizer = SgdMomentum::new(&config.optimizer, &net);
        Ok(Self {
            epsilon: config.schedule().at(0),
            buffer: ReplayBuffer::new(config.replay_capacity, agent_stream(seed, index, Stream::Replay)),
            explore_rng: agent_stream(seed, index, Stream::Explore),
            model: NetCheckpoint::new(&net, &optimizer),
            config,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.model.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.model.net
    }

    pub fn optimizer(&self) -> &SgdMomentum {
        &self.model.optimizer
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn input_size(&self) -> usize {
        self.model.net.input_size()
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.model.net.forward(obs)?)
    }

    pub fn act_on(&mut self, obs: &[f64], explore: bool) -> Result<OperativeMode, AgentError> {
        if explore && self.explore_rng.gen::<f64>() < self.epsilon {
            let i = self.explore_rng.gen_range(0..OperativeMode::COUNT);
            return Ok(OperativeMode::from_index(i).expect("index below COUNT"));
        }
        let q = self.q_values(obs)?;
        Ok(OperativeMode::from_index(argmax(&q)).expect("network has three outputs"))
    }

    pub fn store(&mut self, t: Transition) -> Result<(), AgentError> {
        let n = self.input_size();
        for len in [t.obs.len(), t.next_obs.len()] {
            if len != n {
                return Err(AgentError::Observation { expected: n, got: len });
            }
        }
        self.buffer.push(t);
        Ok(())
    }

    /// `r` for terminal transitions, else `r + gamma * max_a Q(next, a)`.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>, AgentError> {
        let n = self.input_size();
        let mut next = Array2::zeros((batch.len(), n));
        for (j, t) in batch.iter().enumerate() {
            next.row_mut(j).assign(&ndarray::aview1(&t.next_obs));
        }
        let q_next = self.model.net.forward_batch(next.view())?;
        Ok(batch
            .iter()
            .zip(q_next.rows())
            .map(|(t, q)| {
                if t.terminal {
                    t.reward
                } else {
                    t.reward + self.config.gamma * q.fold(f64::NEG_INFINITY, |m, &v| m.max(v))
                }
            })
            .collect())
    }

    /// One replay step: no-op until the buffer holds a full minibatch.
    pub fn learn(&mut self) -> Result<Option<f64>, AgentError> {
        let k = self.config.minibatch;
        let Some(batch) = self.buffer.sample(k) else {
            return Ok(None);
        };
        let batch: Vec<Transition> = batch.into_iter().cloned().collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = self.td_targets(&refs)?;
        let samples: Vec<Sample> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &y)| Sample { input: &t.obs, action: t.action.index(), target: y })
            .collect();
        let loss = train_step(&mut self.model.net, &mut self.model.optimizer, &samples)?;
        Ok(Some(loss))
    }
}

impl CellAgent for DdrlAgent {
    type Obs = Vec<f64>;

    fn observe(&self, snap: &Snapshot<'_>, cell: usize) -> Vec<f64> {
        snap.observation(cell)
    }

    fn act(&mut self, obs: &Vec<f64>, explore: bool) -> OperativeMode {
        self.act_on(obs, explore).expect("observation length fixed by the environment")
    }

    fn update(
        &mut self,
        obs: Vec<f64>,
        action: OperativeMode,
        reward: f64,
        next_obs: Vec<f64>,
        terminal: bool,
    ) -> Result<Option<f64>, AgentError> {
        self.store(Transition { obs, action, reward, next_obs, terminal })?;
        self.learn()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    fn end_episode(&mut self, episode: usize) {
        self.model.optimizer.end_episode();
        self.epsilon = self.config.schedule().at(episode + 1);
    }
}
