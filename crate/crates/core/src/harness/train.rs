use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AgentKind, ExperimentConfig, HarnessError};
use crate::agents::{AgentError, CellAgent, DdrlAgent, FixedModeAgent, TabularQAgent};
use crate::env::{generate_traces, EnvConfig, Environment, OperativeMode, StepOutcome, TraceSet};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const BUNDLE_FILE: &str = "checkpoint.json";

/// One per simulated slot. `modes` are the applied modes and
/// `battery_kwh` the levels at the end of the slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub grid_power_w: f64,
    pub grid_energy_norm: f64,
    pub drop_rate: f64,
    pub modes: Vec<OperativeMode>,
    pub battery_kwh: Vec<f64>,
    pub forced_off: Vec<bool>,
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
}

impl MetricsRecord {
    pub(crate) fn from_outcome(
        episode: usize,
        step: usize,
        out: &StepOutcome,
        epsilon: f64,
        mean_loss: Option<f64>,
    ) -> Self {
        Self {
            episode,
            step,
            reward: out.reward,
            grid_power_w: out.grid_power_w,
            grid_energy_norm: out.grid_energy_norm,
            drop_rate: out.drop_rate,
            modes: out.applied_modes.clone(),
            battery_kwh: out.next_state.batteries.clone(),
            forced_off: out.forced_off.clone(),
            epsilon,
            mean_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub cum_reward: f64,
    pub grid_kwh: f64,
    pub mean_drop: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "agents", rename_all = "snake_case")]
pub enum AgentBundle {
    Ddrl(Vec<DdrlAgent>),
    Tabular(Vec<TabularQAgent>),
    /// Non-learning baseline, one fixed mode per cell.
    Fixed(Vec<FixedModeAgent>),
}

impl AgentBundle {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let n = cfg.env.n_cells;
        let seed = cfg.seeds.agent_seed;
        Ok(match cfg.agent {
            AgentKind::Ddrl => AgentBundle::Ddrl(
                (0..n)
                    .map(|i| DdrlAgent::new(cfg.ddrl.clone(), cfg.env.observation_len(), seed, i))
                    .collect::<Result<_, _>>()?,
            ),
            AgentKind::Tabular => AgentBundle::Tabular(
                (0..n).map(|i| TabularQAgent::new(cfg.tabular.clone(), seed, i)).collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn fixed(modes: &[OperativeMode]) -> Self {
        AgentBundle::Fixed(modes.iter().map(|&m| FixedModeAgent(m)).collect())
    }

    pub fn kind(&self) -> Option<AgentKind> {
        match self {
            AgentBundle::Ddrl(_) => Some(AgentKind::Ddrl),
            AgentBundle::Tabular(_) => Some(AgentKind::Tabular),
            AgentBundle::Fixed(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind().map_or("fixed", AgentKind::name)
    }

    pub fn n_cells(&self) -> usize {
        match self {
            AgentBundle::Ddrl(a) => a.len(),
            AgentBundle::Tabular(a) => a.len(),
            AgentBundle::Fixed(a) => a.len(),
        }
    }

    pub fn check_env(&self, cfg: &EnvConfig) -> Result<(), HarnessError> {
        if self.n_cells() != cfg.n_cells {
            return Err(HarnessError::Bundle(format!("{} agents for {} cells", self.n_cells(), cfg.n_cells)));
        }
        if let AgentBundle::Ddrl(agents) = self {
            if let Some(a) = agents.iter().find(|a| a.input_size() != cfg.observation_len()) {
                return Err(HarnessError::Bundle(format!(
                    "network input {} but observations have length {}",
                    a.input_size(),
                    cfg.observation_len()
                )));
            }
        }
        Ok(())
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        match self {
            AgentBundle::Ddrl(a) => a.iter_mut().for_each(|a| a.set_epsilon(epsilon)),
            AgentBundle::Tabular(a) => a.iter_mut().for_each(|a| a.set_epsilon(epsilon)),
            AgentBundle::Fixed(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RunMode {
    pub explore: bool,
    pub learn: bool,
}

/// Runs the environment to its horizon. Every agent acts on the same
/// pre-step snapshot; after the step each one learns from the shared
/// reward. Calls `on_step` once per slot.
pub(crate) fn run_episode<A>(
    agents: &mut [A],
    env: &mut Environment,
    episode: usize,
    mode: RunMode,
    on_step: &mut dyn FnMut(MetricsRecord) -> Result<(), HarnessError>,
) -> Result<(), HarnessError>
where
    A: CellAgent + Send,
    A::Obs: Send,
{
    while !env.is_done() {
        let step = env.state().step;
        let obs: Vec<A::Obs> = {
            let snap = env.snapshot();
            agents.iter().enumerate().map(|(i, a)| a.observe(&snap, i)).collect()
        };
        let epsilon = agents.first().map_or(0.0, |a| a.epsilon());
        let requested: Vec<OperativeMode> = agents.iter_mut().zip(&obs).map(|(a, o)| a.act(o, mode.explore)).collect();
        let out = env.step(&requested)?;
        let mut mean_loss = None;
        if mode.learn {
            let terminal = env.is_done();
            let next: Vec<A::Obs> = {
                let snap = env.snapshot();
                agents.iter().enumerate().map(|(i, a)| a.observe(&snap, i)).collect()
            };
            let reward = out.reward;
            let losses: Vec<Result<Option<f64>, AgentError>> = agents
                .par_iter_mut()
                .zip(obs.into_par_iter())
                .zip(next.into_par_iter())
                .zip(requested.par_iter())
                .map(|(((a, o), n), &m)| a.update(o, m, reward, n, terminal))
                .collect();
            let mut sum = 0.0;
            let mut count = 0;
            for l in losses {
                if let Some(v) = l.map_err(|source| HarnessError::Training { episode, step, source })? {
                    sum += v;
                    count += 1;
                }
            }
            if count > 0 {
                mean_loss = Some(sum / count as f64);
            }
        }
        on_step(MetricsRecord::from_outcome(episode, step, &out, epsilon, mean_loss))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub bundle: AgentBundle,
    pub episodes: Vec<EpisodeSummary>,
}

/// Traces named by `trace_file`, else synthesized from `seed`.
pub fn load_traces(cfg: &ExperimentConfig, seed: u64) -> Result<TraceSet, HarnessError> {
    match &cfg.trace_file {
        Some(path) => Ok(TraceSet::read_csv(BufReader::new(File::open(path)?), &cfg.env)?),
        None => Ok(generate_traces(&cfg.env, seed)?),
    }
}

/// Trains a fresh bundle for `cfg.episodes` episodes on `traces`.
pub fn train(
    cfg: &ExperimentConfig,
    traces: &TraceSet,
    on_record: &mut dyn FnMut(&MetricsRecord) -> Result<(), HarnessError>,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let mut env = Environment::new(cfg.env.clone(), traces.clone())?;
    let mut bundle = AgentBundle::new(cfg)?;
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let slot_h = cfg.env.slot_hours;
    for episode in 0..cfg.episodes {
        let carry = (cfg.persist_batteries && episode > 0).then(|| env.state().batteries.clone());
        env.reset(carry)?;
        let mut summary = EpisodeSummary { episode, cum_reward: 0.0, grid_kwh: 0.0, mean_drop: 0.0, eps: 0.0 };
        let mut steps = 0usize;
        let mut on_step = |r: MetricsRecord| {
            summary.cum_reward += r.reward;
            summary.grid_kwh += r.grid_power_w * slot_h / 1000.0;
            summary.mean_drop += r.drop_rate;
            summary.eps = r.epsilon;
            steps += 1;
            on_record(&r)
        };
        let mode = RunMode { explore: true, learn: true };
        match &mut bundle {
            AgentBundle::Ddrl(a) => run_episode(a, &mut env, episode, mode, &mut on_step)?,
            AgentBundle::Tabular(a) => run_episode(a, &mut env, episode, mode, &mut on_step)?,
            AgentBundle::Fixed(a) => run_episode(a, &mut env, episode, mode, &mut on_step)?,
        }
        summary.mean_drop /= steps.max(1) as f64;
        match &mut bundle {
            AgentBundle::Ddrl(a) => a.iter_mut().for_each(|a| a.end_episode(episode)),
            AgentBundle::Tabular(a) => a.iter_mut().for_each(|a| a.end_episode(episode)),
            AgentBundle::Fixed(_) => {}
        }
        episodes.push(summary);
    }
    Ok(TrainOutcome { bundle, episodes })
}

pub(crate) fn create_output(path: &Path, force: bool) -> Result<BufWriter<File>, HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    match opts.open(path) {
        Ok(f) => Ok(BufWriter::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(HarnessError::Exists(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

pub fn write_bundle(bundle: &AgentBundle, path: &Path, force: bool) -> Result<(), HarnessError> {
    let mut w = create_output(path, force)?;
    serde_json::to_writer(&mut w, bundle)?;
    w.flush()?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<AgentBundle, HarnessError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Trains and writes `metrics.jsonl`, `episodes.csv` and
/// `checkpoint.json` under `dir`.
pub fn train_to_dir(
    cfg: &ExperimentConfig,
    traces: &TraceSet,
    dir: &Path,
    force: bool,
) -> Result<TrainOutcome, HarnessError> {
    let paths: Vec<PathBuf> = [METRICS_FILE, EPISODES_FILE, BUNDLE_FILE].iter().map(|f| dir.join(f)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(HarnessError::Exists(p.clone()));
        }
    }
    let mut metrics = create_output(&paths[0], force)?;
    let outcome = train(cfg, traces, &mut |r| {
        serde_json::to_writer(&mut metrics, r)?;
        metrics.write_all(b"\n")?;
        Ok(())
    })?;
    metrics.flush()?;
    let mut episodes = csv::Writer::from_writer(create_output(&paths[1], force)?);
    for e in &outcome.episodes {
        episodes.serialize(e)?;
    }
    episodes.flush()?;
    write_bundle(&outcome.bundle, &paths[2], force)?;
    Ok(outcome)
}
