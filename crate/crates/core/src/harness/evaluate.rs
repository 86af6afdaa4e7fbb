use serde::{Deserialize, Serialize};

use super::train::{run_episode, RunMode};
use super::{AgentBundle, HarnessError, MetricsRecord};
use crate::bound::total_cost;
use crate::env::{
    load_norm, mbs_grid_power, mbs_load_norm, p_max, vsc_power, weighted_cost, BatteryDynamics, EnvConfig, Environment,
    OperativeMode, TraceSet,
};

pub const WINTER_MONTH: usize = 11;
pub const SUMMER_MONTH: usize = 7;

/// Fraction of cell-slots spent in each mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeShares {
    pub off: f64,
    pub phy_rf: f64,
    pub mac_phy: f64,
}

impl ModeShares {
    fn from_counts(c: [usize; 3]) -> Self {
        let total = c.iter().sum::<usize>().max(1) as f64;
        Self { off: c[0] as f64 / total, phy_rf: c[1] as f64 / total, mac_phy: c[2] as f64 / total }
    }

    pub fn get(&self, mode: OperativeMode) -> f64 {
        match mode {
            OperativeMode::Off => self.off,
            OperativeMode::PhyRf => self.phy_rf,
            OperativeMode::MacPhy => self.mac_phy,
        }
    }
}

/// Annual outcome of one frozen policy. `total_cost` sums the per-slot
/// weighted costs in the same order as the DP bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub label: String,
    pub n_cells: usize,
    pub harvesting: bool,
    pub epsilon: f64,
    pub trace_seed: Option<u64>,
    pub quantized_bins: Option<usize>,
    pub steps: usize,
    pub grid_kwh: f64,
    pub mean_drop_rate: f64,
    pub cumulative_reward: f64,
    pub total_cost: f64,
    pub forced_off_slots: usize,
    pub mode_shares_by_month: Vec<ModeShares>,
    pub winter: Option<ModeShares>,
    pub summer: Option<ModeShares>,
}

struct Accumulator {
    costs: Vec<f64>,
    grid_kwh: f64,
    drop_sum: f64,
    reward: f64,
    forced: usize,
    month_counts: Vec<[usize; 3]>,
}

impl Accumulator {
    fn new(cfg: &EnvConfig) -> Self {
        Self {
            costs: Vec::with_capacity(cfg.episode_len()),
            grid_kwh: 0.0,
            drop_sum: 0.0,
            reward: 0.0,
            forced: 0,
            month_counts: vec![[0; 3]; cfg.months_per_year],
        }
    }

    fn add(&mut self, cfg: &EnvConfig, r: &MetricsRecord) {
        self.costs.push(1.0 - r.reward);
        self.grid_kwh += r.grid_power_w * cfg.slot_hours / 1000.0;
        self.drop_sum += r.drop_rate;
        self.reward += r.reward;
        self.forced += r.forced_off.iter().filter(|&&f| f).count();
        let m = cfg.month_of(r.step);
        for mode in &r.modes {
            self.month_counts[m][mode.index()] += 1;
        }
    }

    fn finish(self, cfg: &EnvConfig, label: String, harvesting: bool, epsilon: f64) -> EvalSummary {
        let shares: Vec<ModeShares> = self.month_counts.iter().map(|&c| ModeShares::from_counts(c)).collect();
        let steps = self.costs.len();
        EvalSummary {
            label,
            n_cells: cfg.n_cells,
            harvesting,
            epsilon,
            trace_seed: None,
            quantized_bins: None,
            steps,
            grid_kwh: self.grid_kwh,
            mean_drop_rate: self.drop_sum / steps.max(1) as f64,
            cumulative_reward: self.reward,
            total_cost: total_cost(&self.costs),
            forced_off_slots: self.forced,
            winter: shares.get(WINTER_MONTH).copied(),
            summer: shares.get(SUMMER_MONTH).copied(),
            mode_shares_by_month: shares,
        }
    }
}

/// One-year rollout of `bundle` with exploration fixed at `epsilon` and
/// learning disabled; the bundle itself is left untouched.
pub fn evaluate(
    bundle: &AgentBundle,
    env_cfg: &EnvConfig,
    traces: &TraceSet,
    epsilon: f64,
    dynamics: BatteryDynamics,
    on_record: &mut dyn FnMut(&MetricsRecord) -> Result<(), HarnessError>,
) -> Result<EvalSummary, HarnessError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(HarnessError::Config(format!("epsilon {epsilon} outside [0, 1]")));
    }
    bundle.check_env(env_cfg)?;
    let mut env = Environment::with_dynamics(env_cfg.clone(), traces.clone(), dynamics)?;
    let mut agents = bundle.clone();
    agents.set_epsilon(epsilon);
    let mut acc = Accumulator::new(env_cfg);
    let mut on_step = |r: MetricsRecord| {
        acc.add(env_cfg, &r);
        on_record(&r)
    };
    let mode = RunMode { explore: epsilon > 0.0, learn: false };
    match &mut agents {
        AgentBundle::Ddrl(a) => run_episode(a, &mut env, 0, mode, &mut on_step)?,
        AgentBundle::Tabular(a) => run_episode(a, &mut env, 0, mode, &mut on_step)?,
        AgentBundle::Fixed(a) => run_episode(a, &mut env, 0, mode, &mut on_step)?,
    }
    let mut summary = acc.finish(env_cfg, bundle.label().to_string(), true, epsilon);
    summary.trace_seed = traces.seed();
    if let BatteryDynamics::Quantized(grid) = dynamics {
        summary.quantized_bins = Some(grid.bins);
    }
    Ok(summary)
}

/// Reference network without harvesting: every small cell runs MAC-PHY
/// on grid power next to the macro site.
pub fn grid_connected(env_cfg: &EnvConfig, traces: &TraceSet) -> Result<EvalSummary, HarnessError> {
    env_cfg.validate()?;
    traces.check_matches(env_cfg)?;
    let n = env_cfg.n_cells;
    let modes = vec![OperativeMode::MacPhy; n];
    let pmax = p_max(n, &env_cfg.power);
    let mut acc = Accumulator::new(env_cfg);
    for step in 0..env_cfg.episode_len() {
        let loads: Vec<f64> = (0..n).map(|c| traces.load(c, step)).collect();
        let norms: Vec<f64> = loads.iter().map(|&l| load_norm(l, env_cfg)).collect();
        let mut grid_power_w = mbs_grid_power(&modes, &norms, mbs_load_norm(step, &loads, env_cfg), &env_cfg.power)?;
        for &l in &norms {
            grid_power_w += vsc_power(OperativeMode::MacPhy, l, &env_cfg.power)?;
        }
        let grid_energy_norm = grid_power_w / pmax;
        let record = MetricsRecord {
            episode: 0,
            step,
            reward: 1.0 - weighted_cost(grid_energy_norm, 0.0, env_cfg.weight),
            grid_power_w,
            grid_energy_norm,
            drop_rate: 0.0,
            modes: modes.clone(),
            battery_kwh: vec![0.0; n],
            forced_off: vec![false; n],
            epsilon: 0.0,
            mean_loss: None,
        };
        acc.add(env_cfg, &record);
    }
    let mut summary = acc.finish(env_cfg, "grid-connected".into(), false, 0.0);
    summary.trace_seed = traces.seed();
    Ok(summary)
}
