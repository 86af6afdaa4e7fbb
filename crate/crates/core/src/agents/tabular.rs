//! Tabular multi-agent Q-learning benchmark over crisp, uniformly
//! quantized local state (own battery, harvest, own load, macro load).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, AgentError, CellAgent, EpsilonSchedule};
use crate::env::{OperativeMode, Snapshot};
use crate::rng::{agent_stream, Stream};

/// `(battery_bin, harvest_bin, local_load_bin, mbs_load_bin)`.
pub type StateKey = [u8; 4];

/// Uniform bin of `value` in `[0, 1]`; the right edge falls in the last bin.
pub fn quantize(value: f64, levels: usize) -> usize {
    debug_assert!(levels >= 1);
    let v = value.clamp(0.0, 1.0);
    ((v * levels as f64).floor() as usize).min(levels - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularConfig {
    pub levels: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eps_initial: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self { levels: 5, alpha: 0.1, gamma: 0.9, eps_initial: 0.9, eps_decay: 0.9, eps_min: 0.0 }
    }
}

impl TabularConfig {
    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule { initial: self.eps_initial, decay: self.eps_decay, min: self.eps_min }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(1..=256).contains(&self.levels) {
            return Err(AgentError::Config(format!("levels must be in 1..=256, got {}", self.levels)));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config("alpha must be in [0, 1] and gamma in [0, 1)".into()));
        }
        self.schedule().validate()
    }
}

/// One serialized Q-table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub bin0: u8,
    pub bin1: u8,
    pub bin2: u8,
    pub bin3: u8,
    pub q_off: f64,
    pub q_phyrf: f64,
    pub q_macphy: f64,
}

mod q_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BTreeMap<StateKey, [f64; 3]>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(q.iter().map(|(k, v)| QRow::from_entry(*k, *v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<StateKey, [f64; 3]>, D::Error> {
        let rows = Vec::<QRow>::deserialize(d)?;
        Ok(rows.into_iter().map(QRow::into_entry).collect())
    }
}

impl QRow {
    fn from_entry(k: StateKey, q: [f64; 3]) -> Self {
        Self { bin0: k[0], bin1: k[1], bin2: k[2], bin3: k[3], q_off: q[0], q_phyrf: q[1], q_macphy: q[2] }
    }

    fn into_entry(self) -> (StateKey, [f64; 3]) {
        ([self.bin0, self.bin1, self.bin2, self.bin3], [self.q_off, self.q_phyrf, self.q_macphy])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularQAgent {
    pub config: TabularConfig,
    #[serde(with = "q_rows")]
    q: BTreeMap<StateKey, [f64; 3]>,
    explore_rng: ChaCha8Rng,
    epsilon: f64,
}

impl TabularQAgent {
    pub fn new(config: TabularConfig, seed: u64, index: usize) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self {
            epsilon: config.schedule().at(0),
            explore_rng: agent_stream(seed, index, Stream::Explore),
            q: BTreeMap::new(),
            config,
        })
    }

    /// Q-values of `state`; unseen states read as zero.
    pub fn q(&self, state: &StateKey) -> [f64; 3] {
        self.q.get(state).copied().unwrap_or([0.0; 3])
    }

    pub fn table_len(&self) -> usize {
        self.q.len()
    }

    pub fn state_key(&self, snap: &Snapshot<'_>, cell: usize) -> StateKey {
        let z = self.config.levels;
        let bin = |v: f64| quantize(v, z) as u8;
        [
            bin(snap.battery_frac(cell)),
            bin(snap.harvest_norm(cell)),
            bin(snap.load_norm(cell)),
            bin(snap.mbs_load_norm()),
        ]
    }

    pub fn act_on(&mut self, state: &StateKey, explore: bool) -> OperativeMode {
        if explore && self.explore_rng.gen::<f64>() < self.epsilon {
            let i = self.explore_rng.gen_range(0..OperativeMode::COUNT);
            return OperativeMode::from_index(i).expect("index below COUNT");
        }
        OperativeMode::from_index(argmax(&self.q(state))).expect("three actions")
    }

    /// `Q <- Q + alpha * (r + gamma * max Q(next) - Q)`; the bootstrap term
    /// is dropped for terminal transitions. Returns the new value.
    pub fn learn_tabular(
        &mut self,
        state: StateKey,
        action: OperativeMode,
        reward: f64,
        next: StateKey,
        terminal: bool,
    ) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.q(&next).into_iter().fold(f64::NEG_INFINITY, f64::max) };
        let (alpha, gamma) = (self.config.alpha, self.config.gamma);
        let entry = self.q.entry(state).or_insert([0.0; 3]);
        let old = entry[action.index()];
        let new = old + alpha * (reward + gamma * bootstrap - old);
        entry[action.index()] = new;
        new
    }

    pub fn write_q_table<W: Write>(&self, writer: W) -> Result<(), AgentError> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, v) in &self.q {
            w.serialize(QRow::from_entry(*k, *v))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Replaces the table with rows `bin0,bin1,bin2,bin3,q_off,q_phyrf,q_macphy`.
    pub fn read_q_table<R: Read>(&mut self, reader: R) -> Result<(), AgentError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut q = BTreeMap::new();
        for (i, row) in r.deserialize::<QRow>().enumerate() {
            let (key, values) = row?.into_entry();
            if key.iter().any(|&b| b as usize >= self.config.levels) {
                return Err(AgentError::QTable { line: i + 2, msg: format!("bin outside 0..{}", self.config.levels) });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(AgentError::QTable { line: i + 2, msg: "non-finite Q-value".into() });
            }
            q.insert(key, values);
        }
        self.q = q;
        Ok(())
    }
}

impl CellAgent for TabularQAgent {
    type Obs = StateKey;

    fn observe(&self, snap: &Snapshot<'_>, cell: usize) -> StateKey {
        self.state_key(snap, cell)
    }

    fn act(&mut self, obs: &StateKey, explore: bool) -> OperativeMode {
        self.act_on(obs, explore)
    }

    fn update(
        &mut self,
        obs: StateKey,
        action: OperativeMode,
        reward: f64,
        next_obs: StateKey,
        terminal: bool,
    ) -> Result<Option<f64>, AgentError> {
        self.learn_tabular(obs, action, reward, next_obs, terminal);
        Ok(None)
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    fn end_episode(&mut self, episode: usize) {
        self.epsilon = self.config.schedule().at(episode + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(alpha: f64, gamma: f64) -> TabularQAgent {
        TabularQAgent::new(TabularConfig { alpha, gamma, ..Default::default() }, 0, 0).unwrap()
    }

    #[test]
    fn quantize_edges() {
        assert_eq!(quantize(0.0, 5), 0);
        assert_eq!(quantize(1.0, 5), 4);
        assert_eq!(quantize(0.5, 5), 2);
        assert_eq!(quantize(0.199_999, 5), 0);
        assert_eq!(quantize(0.2, 5), 1);
    }

    #[test]
    fn q_update_arithmetic() {
        let mut a = agent(0.01, 0.9);
        let s = [0, 1, 2, 3];
        let v = a.learn_tabular(s, OperativeMode::MacPhy, 0.5, [1, 1, 1, 1], false);
        assert!((v - 0.005).abs() < 1e-15);
        assert_eq!(a.q(&s), [0.0, 0.0, v]);

        let mut a = agent(0.01, 0.9);
        assert_eq!(a.learn_tabular(s, OperativeMode::Off, 0.0, s, false), 0.0);

        let mut a = agent(1.0, 0.0);
        a.learn_tabular([1, 1, 1, 1], OperativeMode::Off, 0.9, s, false);
        assert_eq!(a.learn_tabular(s, OperativeMode::PhyRf, 0.37, [1, 1, 1, 1], false), 0.37);
    }

    #[test]
    fn terminal_drops_bootstrap() {
        let mut a = agent(1.0, 0.9);
        let next = [4, 4, 4, 4];
        a.learn_tabular(next, OperativeMode::Off, 1.0, next, true);
        assert_eq!(a.learn_tabular([0; 4], OperativeMode::Off, 0.2, next, true), 0.2);
        assert!((a.learn_tabular([0; 4], OperativeMode::Off, 0.2, next, false) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn q_table_csv_round_trip() {
        let mut a = agent(0.5, 0.9);
        a.learn_tabular([0, 1, 2, 3], OperativeMode::PhyRf, 0.3, [4, 4, 4, 4], false);
        a.learn_tabular([4, 4, 4, 4], OperativeMode::MacPhy, 0.8, [0, 1, 2, 3], false);
        let mut buf = Vec::new();
        a.write_q_table(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin0,bin1,bin2,bin3,q_off,q_phyrf,q_macphy\n"));
        let mut b = agent(0.5, 0.9);
        b.read_q_table(buf.as_slice()).unwrap();
        assert_eq!(a.q, b.q);

        let bad = "bin0,bin1,bin2,bin3,q_off,q_phyrf,q_macphy\n9,0,0,0,0,0,0\n";
        assert!(matches!(b.read_q_table(bad.as_bytes()), Err(AgentError::QTable { line: 2, .. })));
    }

    #[test]
    fn json_round_trip() {
        let mut a = agent(0.5, 0.9);
        a.learn_tabular([0, 1, 2, 3], OperativeMode::PhyRf, 0.3, [4, 4, 4, 4], false);
        let back: TabularQAgent = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
