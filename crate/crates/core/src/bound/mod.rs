//! Offline bound: finite-horizon dynamic programming over the joint
//! quantized battery levels, with the traces known in advance.
//!
//! Backward induction uses `V_T = 0` and
//! `V_t(b) = min_a [cost_t(a) + V_{t+1}(b')]` over joint modes that keep
//! every powered cell above the SOC floor. `b'` follows the same battery
//! update as the environment and then snaps to the nearest bin, so a
//! policy replayed through [`Environment`] in quantized mode reproduces
//! the DP costs exactly.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    mode_energy_kwh, slot_metrics, BatteryDynamics, BatteryGrid, EnvConfig, EnvError, Environment, OperativeMode,
    TraceSet,
};

pub const MAX_CELLS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum BoundError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("replayed DP policy diverged from the DP model at step {0}")]
    Replay(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    pub n_cells: usize,
    pub battery_bins: usize,
    pub horizon: usize,
    pub weight: f64,
}

impl DpConfig {
    /// Full-episode bound with 21 battery bins.
    pub fn for_env(cfg: &EnvConfig) -> Self {
        Self { n_cells: cfg.n_cells, battery_bins: 21, horizon: cfg.episode_len(), weight: cfg.weight }
    }

    pub fn validate(&self, env_cfg: &EnvConfig, traces: &TraceSet) -> Result<(), BoundError> {
        if self.n_cells == 0 || self.n_cells > MAX_CELLS {
            return Err(BoundError::Domain(format!("DP supports 1..={MAX_CELLS} cells, got {}", self.n_cells)));
        }
        if self.n_cells != env_cfg.n_cells || self.n_cells != traces.n_cells() {
            return Err(BoundError::Domain("DP cell count differs from environment or traces".into()));
        }
        if self.battery_bins < 2 {
            return Err(BoundError::Domain(format!("battery_bins must be >= 2, got {}", self.battery_bins)));
        }
        let states = (self.battery_bins as u64).checked_pow(self.n_cells as u32);
        if states.is_none_or(|s| s > 50_000_000) {
            return Err(BoundError::Domain("joint battery state space too large".into()));
        }
        if self.horizon == 0 || self.horizon > env_cfg.episode_len() || self.horizon > traces.steps() {
            return Err(BoundError::Domain(format!("horizon {} outside 1..={}", self.horizon, env_cfg.episode_len())));
        }
        if self.weight != env_cfg.weight {
            return Err(BoundError::Domain("DP weight differs from environment weight".into()));
        }
        env_cfg.validate()?;
        Ok(())
    }
}

/// Joint action `a` sets cell `i` to mode digit `i` of `a` in base 3.
pub fn joint_modes(code: usize, n_cells: usize) -> Vec<OperativeMode> {
    let mut c = code;
    (0..n_cells)
        .map(|_| {
            let m = OperativeMode::from_index(c % 3).expect("base-3 digit");
            c /= 3;
            m
        })
        .collect()
}

pub fn joint_code(modes: &[OperativeMode]) -> usize {
    modes.iter().rev().fold(0, |acc, m| acc * 3 + m.index())
}

/// Sum of per-slot costs folded from the last slot backwards, the order in
/// which backward induction accumulates them.
pub fn total_cost(costs: &[f64]) -> f64 {
    costs.iter().rev().fold(0.0, |acc, &c| c + acc)
}

#[derive(Debug, Clone)]
pub struct DpSolution {
    pub config: DpConfig,
    pub grid: BatteryGrid,
    states: usize,
    /// `(horizon + 1) x states`, row `t` is `V_t`.
    cost_to_go: Vec<f64>,
    /// `horizon x states` joint action codes.
    policy: Vec<u8>,
    pub initial_state: usize,
    pub total_cost: f64,
}

impl DpSolution {
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn joint_bin(&self, bins: &[usize]) -> usize {
        bins.iter().rev().fold(0, |acc, &b| acc * self.grid.bins + b)
    }

    pub fn bins_of(&self, joint: usize) -> Vec<usize> {
        let mut j = joint;
        (0..self.config.n_cells)
            .map(|_| {
                let b = j % self.grid.bins;
                j /= self.grid.bins;
                b
            })
            .collect()
    }

    pub fn value(&self, step: usize, joint: usize) -> f64 {
        self.cost_to_go[step * self.states + joint]
    }

    pub fn action(&self, step: usize, joint: usize) -> Vec<OperativeMode> {
        joint_modes(self.policy[step * self.states + joint] as usize, self.config.n_cells)
    }

    /// Replays the optimal policy from the initial bins through the
    /// quantized environment.
    pub fn rollout(&self, env_cfg: &EnvConfig, traces: &TraceSet) -> Result<DpRollout, BoundError> {
        let mut env =
            Environment::with_dynamics(env_cfg.clone(), traces.clone(), BatteryDynamics::Quantized(self.grid))?
                .with_horizon(self.config.horizon)?;
        let mut steps = Vec::with_capacity(self.config.horizon);
        while !env.is_done() {
            let t = env.state().step;
            let bins: Vec<usize> = env.state().batteries.iter().map(|&b| self.grid.snap(b)).collect();
            let joint = self.joint_bin(&bins);
            let modes = self.action(t, joint);
            let out = env.step(&modes)?;
            if out.forced_off.iter().any(|&f| f) {
                return Err(BoundError::Replay(t));
            }
            steps.push(DpStep {
                step: t,
                joint_bin: joint,
                modes,
                grid_power_w: out.grid_power_w,
                grid_energy_norm: out.grid_energy_norm,
                drop_rate: out.drop_rate,
                cost: out.cost,
            });
        }
        Ok(DpRollout { slot_hours: env_cfg.slot_hours, steps })
    }

    /// Writes `step,joint_bin,mode_0,...`; every state when `full`, else
    /// only the states visited by `rollout`.
    pub fn write_policy_csv<W: Write>(&self, mut w: W, rollout: Option<&DpRollout>) -> Result<(), BoundError> {
        let n = self.config.n_cells;
        let header: Vec<String> =
            ["step".into(), "joint_bin".into()].into_iter().chain((0..n).map(|i| format!("mode_{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        let row = |w: &mut W, t: usize, joint: usize| -> std::io::Result<()> {
            let modes: Vec<String> = self.action(t, joint).iter().map(|m| m.code().to_string()).collect();
            writeln!(w, "{t},{joint},{}", modes.join(","))
        };
        match rollout {
            Some(r) => {
                for s in &r.steps {
                    row(&mut w, s.step, s.joint_bin)?;
                }
            }
            None => {
                for t in 0..self.config.horizon {
                    for joint in 0..self.states {
                        row(&mut w, t, joint)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpStep {
    pub step: usize,
    pub joint_bin: usize,
    pub modes: Vec<OperativeMode>,
    pub grid_power_w: f64,
    pub grid_energy_norm: f64,
    pub drop_rate: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpRollout {
    pub slot_hours: f64,
    pub steps: Vec<DpStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSummary {
    pub label: String,
    pub harvesting: bool,
    pub n_cells: usize,
    pub battery_bins: usize,
    pub horizon: usize,
    pub total_cost: f64,
    pub e_sum: f64,
    pub d_sum: f64,
    pub grid_kwh: f64,
    pub mean_drop_rate: f64,
    pub cumulative_reward: f64,
}

impl DpRollout {
    pub fn total_cost(&self) -> f64 {
        total_cost(&self.steps.iter().map(|s| s.cost).collect::<Vec<_>>())
    }

    pub fn summary(&self, solution: &DpSolution) -> DpSummary {
        let n = self.steps.len().max(1) as f64;
        DpSummary {
            label: "dp-bound".into(),
            harvesting: true,
            n_cells: solution.config.n_cells,
            battery_bins: solution.config.battery_bins,
            horizon: solution.config.horizon,
            total_cost: solution.total_cost,
            e_sum: self.steps.iter().map(|s| s.grid_energy_norm).sum(),
            d_sum: self.steps.iter().map(|s| s.drop_rate).sum(),
            grid_kwh: self.steps.iter().map(|s| s.grid_power_w * self.slot_hours / 1000.0).sum(),
            mean_drop_rate: self.steps.iter().map(|s| s.drop_rate).sum::<f64>() / n,
            cumulative_reward: self.steps.iter().map(|s| 1.0 - s.cost).sum(),
        }
    }
}

const INFEASIBLE: usize = usize::MAX;

pub fn solve(traces: &TraceSet, cfg: &DpConfig, env_cfg: &EnvConfig) -> Result<DpSolution, BoundError> {
    cfg.validate(env_cfg, traces)?;
    let n = cfg.n_cells;
    let grid = BatteryGrid::new(cfg.battery_bins, env_cfg.battery.capacity)?;
    let bins = grid.bins;
    let states = bins.pow(n as u32);
    let actions = 3usize.pow(n as u32);
    let strides: Vec<usize> = (0..n).map(|i| bins.pow(i as u32)).collect();
    let action_modes: Vec<Vec<OperativeMode>> = (0..actions).map(|a| joint_modes(a, n)).collect();
    let state_bins: Vec<Vec<usize>> = (0..states).map(|s| (0..n).map(|i| (s / strides[i]) % bins).collect()).collect();

    let horizon = cfg.horizon;
    let mut cost_to_go = vec![0.0f64; (horizon + 1) * states];
    let mut policy = vec![0u8; horizon * states];
    let bat = &env_cfg.battery;

    for t in (0..horizon).rev() {
        let loads: Vec<f64> = (0..n).map(|c| traces.load(c, t)).collect();
        let stage_cost: Vec<f64> = action_modes
            .iter()
            .map(|m| slot_metrics(m, t, &loads, env_cfg).map(|s| s.cost))
            .collect::<Result<_, _>>()?;
        // offset[cell][mode][bin]: stride-weighted next bin, or INFEASIBLE
        let mut offset = vec![[vec![0usize; bins], vec![0usize; bins], vec![0usize; bins]]; n];
        for (c, per_mode) in offset.iter_mut().enumerate() {
            let harvest = traces.harvest(c, t);
            for mode in OperativeMode::ALL {
                let used = mode_energy_kwh(mode, loads[c], env_cfg)?;
                for (b, slot) in per_mode[mode.index()].iter_mut().enumerate() {
                    let level = grid.value(b);
                    *slot = if bat.breaches_floor(level, harvest, used) {
                        INFEASIBLE
                    } else {
                        grid.snap(bat.next_level(level, harvest, used)) * strides[c]
                    };
                }
            }
        }

        let (head, tail) = cost_to_go.split_at_mut((t + 1) * states);
        let v_now = &mut head[t * states..];
        let v_next = &tail[..states];
        let pol = &mut policy[t * states..(t + 1) * states];
        v_now.par_iter_mut().zip(pol.par_iter_mut()).enumerate().for_each(|(s, (v, p))| {
            let sb = &state_bins[s];
            let mut best = f64::INFINITY;
            let mut arg = 0usize;
            'actions: for (a, modes) in action_modes.iter().enumerate() {
                let mut next = 0usize;
                for (c, m) in modes.iter().enumerate() {
                    let o = offset[c][m.index()][sb[c]];
                    if o == INFEASIBLE {
                        continue 'actions;
                    }
                    next += o;
                }
                let val = stage_cost[a] + v_next[next];
                if val < best {
                    best = val;
                    arg = a;
                }
            }
            *v = best;
            *p = arg as u8;
        });
    }

    let initial_bins = vec![grid.snap(bat.initial_kwh()); n];
    let initial_state = initial_bins.iter().zip(&strides).map(|(b, s)| b * s).sum();
    Ok(DpSolution {
        total_cost: cost_to_go[initial_state],
        config: cfg.clone(),
        grid,
        states,
        cost_to_go,
        policy,
        initial_state,
    })
}
