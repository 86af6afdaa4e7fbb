//! Network state, the one-slot transition and per-agent observations.

use serde::{Deserialize, Serialize};

use super::power::{drop_rate, mbs_grid_power, p_max, vsc_power};
use super::traces::profile_shape;
use super::{BatteryGrid, CyclicEncoding, EnvConfig, EnvError, MbsLoadMode, OperativeMode, TraceSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub step: usize,
    pub hour: usize,
    pub month: usize,
    /// Battery charge per cell (kWh).
    pub batteries: Vec<f64>,
    /// Demand per cell in this slot (MB).
    pub loads: Vec<f64>,
}

impl NetworkState {
    /// State at `step` with the given batteries; loads and calendar are
    /// read from the traces.
    pub fn at(step: usize, batteries: Vec<f64>, traces: &TraceSet, cfg: &EnvConfig) -> Self {
        let idx = step % traces.steps();
        Self {
            step,
            hour: cfg.hour_of(step),
            month: cfg.month_of(step),
            loads: (0..traces.n_cells()).map(|c| traces.load(c, idx)).collect(),
            batteries,
        }
    }

    pub fn initial(traces: &TraceSet, cfg: &EnvConfig) -> Self {
        Self::at(0, vec![cfg.battery.initial_kwh(); cfg.n_cells], traces, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: NetworkState,
    /// `1 - cost`.
    pub reward: f64,
    /// `weight * E + (1 - weight) * D`.
    pub cost: f64,
    pub grid_energy_norm: f64,
    pub drop_rate: f64,
    pub grid_power_w: f64,
    pub applied_modes: Vec<OperativeMode>,
    pub forced_off: Vec<bool>,
}

/// Grid-side figures of one slot for a given set of applied modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotMetrics {
    pub grid_power_w: f64,
    pub grid_energy_norm: f64,
    pub drop_rate: f64,
    pub cost: f64,
}

/// Cell load normalized by the peak demand and clipped to `[0, 1]`.
pub fn load_norm(load_mb: f64, cfg: &EnvConfig) -> f64 {
    (load_mb / cfg.max_load_mb()).clamp(0.0, 1.0)
}

pub fn mbs_load_norm(step: usize, loads: &[f64], cfg: &EnvConfig) -> f64 {
    match cfg.mbs_load_mode {
        MbsLoadMode::MeanOfCells => loads.iter().map(|&l| load_norm(l, cfg)).sum::<f64>() / loads.len() as f64,
        MbsLoadMode::FixedProfile => profile_shape(cfg.traffic_profile, cfg.hour_of(step), cfg.is_weekend(step)),
    }
}

pub fn weighted_cost(grid_energy_norm: f64, drop_rate: f64, weight: f64) -> f64 {
    weight * grid_energy_norm + (1.0 - weight) * drop_rate
}

/// Evaluates grid power, normalized grid energy, drop rate and weighted
/// cost for `modes` applied in slot `step`.
pub fn slot_metrics(
    modes: &[OperativeMode],
    step: usize,
    loads: &[f64],
    cfg: &EnvConfig,
) -> Result<SlotMetrics, EnvError> {
    let norms: Vec<f64> = loads.iter().map(|&l| load_norm(l, cfg)).collect();
    let grid_power_w = mbs_grid_power(modes, &norms, mbs_load_norm(step, loads, cfg), &cfg.power)?;
    let grid_energy_norm = grid_power_w / p_max(cfg.n_cells, &cfg.power);
    let drop_rate = drop_rate(modes, loads)?;
    Ok(SlotMetrics {
        grid_power_w,
        grid_energy_norm,
        drop_rate,
        cost: weighted_cost(grid_energy_norm, drop_rate, cfg.weight),
    })
}

/// Energy (kWh) a cell spends in one slot in `mode`.
pub fn mode_energy_kwh(mode: OperativeMode, load_mb: f64, cfg: &EnvConfig) -> Result<f64, EnvError> {
    Ok(cfg.slot_energy_kwh(vsc_power(mode, load_norm(load_mb, cfg), &cfg.power)?))
}

/// Battery update model: continuous levels, or levels snapped to a grid
/// after every slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatteryDynamics {
    Continuous,
    Quantized(BatteryGrid),
}

impl BatteryDynamics {
    pub fn apply(&self, level: f64) -> f64 {
        match self {
            Self::Continuous => level,
            Self::Quantized(grid) => grid.quantize(level),
        }
    }
}

/// Advances the network by one slot.
///
/// Cells whose requested mode would pull the battery under the SOC floor
/// (counting this slot's harvest) are switched off instead. Batteries
/// then follow `min(B + H - P * dt, B_cap)`, clamped at zero.
pub fn step(
    state: &NetworkState,
    requested: &[OperativeMode],
    traces: &TraceSet,
    cfg: &EnvConfig,
) -> Result<StepOutcome, EnvError> {
    step_with(state, requested, traces, cfg, BatteryDynamics::Continuous)
}

pub fn step_with(
    state: &NetworkState,
    requested: &[OperativeMode],
    traces: &TraceSet,
    cfg: &EnvConfig,
    dynamics: BatteryDynamics,
) -> Result<StepOutcome, EnvError> {
    let n = cfg.n_cells;
    if requested.len() != n {
        return Err(EnvError::Dimension { what: "requested modes", expected: n, got: requested.len() });
    }
    if state.batteries.len() != n || state.loads.len() != n {
        return Err(EnvError::Dimension { what: "state cells", expected: n, got: state.batteries.len() });
    }
    if state.step >= traces.steps() || state.step >= cfg.episode_len() {
        return Err(EnvError::OutOfRange { step: state.step, len: traces.steps().min(cfg.episode_len()) });
    }
    let t = state.step;
    let bat = &cfg.battery;
    let mut applied = Vec::with_capacity(n);
    let mut forced_off = Vec::with_capacity(n);
    let mut next_batteries = Vec::with_capacity(n);
    for cell in 0..n {
        let level = state.batteries[cell];
        if !(0.0..=bat.capacity).contains(&level) {
            return Err(EnvError::Domain(format!("battery {cell} at {level} kWh outside [0, capacity]")));
        }
        let harvest = traces.harvest(cell, t);
        let mut mode = requested[cell];
        let mut used = mode_energy_kwh(mode, state.loads[cell], cfg)?;
        let forced = bat.breaches_floor(level, harvest, used);
        if forced {
            mode = OperativeMode::Off;
            used = 0.0;
        }
        applied.push(mode);
        forced_off.push(forced);
        next_batteries.push(dynamics.apply(bat.next_level(level, harvest, used)));
    }
    let m = slot_metrics(&applied, t, &state.loads, cfg)?;
    Ok(StepOutcome {
        next_state: NetworkState::at(t + 1, next_batteries, traces, cfg),
        reward: 1.0 - m.cost,
        cost: m.cost,
        grid_energy_norm: m.grid_energy_norm,
        drop_rate: m.drop_rate,
        grid_power_w: m.grid_power_w,
        applied_modes: applied,
        forced_off,
    })
}

/// Observation of one cell: cyclic hour and month, own normalized load,
/// and every cell's battery fraction.
pub fn build_observation(state: &NetworkState, cell: usize, cfg: &EnvConfig) -> Result<Vec<f64>, EnvError> {
    if cell >= cfg.n_cells {
        return Err(EnvError::Domain(format!("cell {cell} out of range for {} cells", cfg.n_cells)));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let hour_angle = tau * state.hour as f64 / 24.0;
    let month_angle = tau * state.month as f64 / cfg.months_per_year as f64;
    let mut obs = Vec::with_capacity(cfg.observation_len());
    obs.push(hour_angle.sin());
    obs.push(month_angle.sin());
    if cfg.cyclic_encoding == CyclicEncoding::SinCos {
        obs.push(hour_angle.cos());
        obs.push(month_angle.cos());
    }
    obs.push(load_norm(state.loads[cell], cfg));
    obs.extend(state.batteries.iter().map(|b| (b / cfg.battery.capacity).clamp(0.0, 1.0)));
    Ok(obs)
}

/// Read-only view handed to agents when they build observations.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub state: &'a NetworkState,
    pub traces: &'a TraceSet,
    pub cfg: &'a EnvConfig,
}

impl Snapshot<'_> {
    fn idx(&self) -> usize {
        self.state.step % self.traces.steps()
    }

    pub fn harvest(&self, cell: usize) -> f64 {
        self.traces.harvest(cell, self.idx())
    }

    /// Current-slot harvest relative to the largest harvest in the traces.
    pub fn harvest_norm(&self, cell: usize) -> f64 {
        let max = self.traces.harvest_max();
        if max > 0.0 {
            (self.harvest(cell) / max).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn load_norm(&self, cell: usize) -> f64 {
        load_norm(self.state.loads[cell], self.cfg)
    }

    pub fn battery_frac(&self, cell: usize) -> f64 {
        (self.state.batteries[cell] / self.cfg.battery.capacity).clamp(0.0, 1.0)
    }

    pub fn mbs_load_norm(&self) -> f64 {
        mbs_load_norm(self.state.step, &self.state.loads, self.cfg).clamp(0.0, 1.0)
    }

    pub fn observation(&self, cell: usize) -> Vec<f64> {
        build_observation(self.state, cell, self.cfg).expect("cell index checked by caller")
    }
}

/// A stepping environment owning its configuration, traces and state.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    traces: TraceSet,
    state: NetworkState,
    dynamics: BatteryDynamics,
    horizon: usize,
}

impl Environment {
    pub fn new(cfg: EnvConfig, traces: TraceSet) -> Result<Self, EnvError> {
        Self::with_dynamics(cfg, traces, BatteryDynamics::Continuous)
    }

    pub fn with_dynamics(cfg: EnvConfig, traces: TraceSet, dynamics: BatteryDynamics) -> Result<Self, EnvError> {
        cfg.validate()?;
        traces.check_matches(&cfg)?;
        let horizon = cfg.episode_len();
        let mut state = NetworkState::initial(&traces, &cfg);
        for b in &mut state.batteries {
            *b = dynamics.apply(*b);
        }
        Ok(Self { cfg, traces, state, dynamics, horizon })
    }

    /// Shortens the episode to `horizon` slots.
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, EnvError> {
        if horizon == 0 || horizon > self.cfg.episode_len() {
            return Err(EnvError::OutOfRange { step: horizon, len: self.cfg.episode_len() });
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn traces(&self) -> &TraceSet {
        &self.traces
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn snapshot(&self) -> Snapshot<'_> {
        Snapshot { state: &self.state, traces: &self.traces, cfg: &self.cfg }
    }

    /// Restarts at step 0. With `batteries` set, the charge carries over
    /// instead of resetting to the configured initial level.
    pub fn reset(&mut self, batteries: Option<Vec<f64>>) -> Result<(), EnvError> {
        let levels = match batteries {
            Some(b) if b.len() != self.cfg.n_cells => {
                return Err(EnvError::Dimension { what: "batteries", expected: self.cfg.n_cells, got: b.len() });
            }
            Some(b) => b,
            None => vec![self.cfg.battery.initial_kwh(); self.cfg.n_cells],
        };
        let levels = levels.into_iter().map(|b| self.dynamics.apply(b)).collect();
        self.state = NetworkState::at(0, levels, &self.traces, &self.cfg);
        Ok(())
    }

    pub fn set_batteries(&mut self, batteries: Vec<f64>) -> Result<(), EnvError> {
        if batteries.len() != self.cfg.n_cells {
            return Err(EnvError::Dimension { what: "batteries", expected: self.cfg.n_cells, got: batteries.len() });
        }
        self.state.batteries = batteries;
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.horizon
    }

    pub fn step(&mut self, requested: &[OperativeMode]) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::OutOfRange { step: self.state.step, len: self.horizon });
        }
        let outcome = step_with(&self.state, requested, &self.traces, &self.cfg, self.dynamics)?;
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }
}
