//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitctl_core::agents::{DdrlAgent, DdrlConfig, TabularConfig, TabularQAgent, Transition};
use splitctl_core::bound::{solve, total_cost, DpConfig};
use splitctl_core::env::{
    BatteryDynamics, BatteryGrid, BatteryParams, EnvConfig, Environment, OperativeMode, TraceSet,
};
use splitctl_core::nn::{DenseNet, OptimizerConfig, Sample};

/// Minimum total cost over every joint action sequence, each simulated
/// from scratch on the quantized environment.
pub fn brute_force_min(cfg: &EnvConfig, traces: &TraceSet, grid: BatteryGrid, horizon: usize) -> f64 {
    let n = cfg.n_cells;
    let per_step = 3usize.pow(n as u32);
    let paths = per_step.pow(horizon as u32);
    let mut best = f64::INFINITY;
    for path in 0..paths {
        let mut env = Environment::with_dynamics(cfg.clone(), traces.clone(), BatteryDynamics::Quantized(grid))
            .unwrap()
            .with_horizon(horizon)
            .unwrap();
        let mut code = path;
        let mut costs = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut joint = code % per_step;
            code /= per_step;
            let modes: Vec<OperativeMode> = (0..n)
                .map(|_| {
                    let m = OperativeMode::ALL[joint % 3];
                    joint /= 3;
                    m
                })
                .collect();
            costs.push(env.step(&modes).unwrap().cost);
        }
        best = best.min(total_cost(&costs));
    }
    best
}

/// A random small instance: one-day calendar, random traces, battery
/// start and weight.
pub fn random_instance(rng: &mut ChaCha8Rng, n_cells: usize) -> (EnvConfig, TraceSet) {
    let battery = BatteryParams { initial_frac: rng.gen_range(0.2..=1.0), ..Default::default() };
    let cfg = EnvConfig {
        n_cells,
        days_per_month: 1,
        months_per_year: 1,
        weight: rng.gen_range(0.05..0.95),
        battery,
        ..Default::default()
    };
    let steps = cfg.episode_len();
    let max_load = cfg.max_load_mb();
    let harvest = (0..n_cells)
        .map(|_| (0..steps).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..0.3) } else { 0.0 }).collect())
        .collect();
    let load = (0..n_cells).map(|_| (0..steps).map(|_| rng.gen_range(0.0..max_load)).collect()).collect();
    (cfg, TraceSet::new(harvest, load, None).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic toy MDP: `NEXT[s][a]`, `REWARD[s][a]`.
pub const TOY_NEXT: [[usize; 3]; 2] = [[0, 1, 0], [0, 1, 0]];
pub const TOY_REWARD: [[f64; 3]; 2] = [[0.1, 0.0, 0.2], [1.0, 0.3, 0.0]];
pub const TOY_GAMMA: f64 = 0.9;

pub fn toy_value_iteration() -> [[f64; 3]; 2] {
    let mut q = [[0.0; 3]; 2];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        for s in 0..2 {
            for a in 0..3 {
                q[s][a] = TOY_REWARD[s][a] + TOY_GAMMA * v[TOY_NEXT[s][a]];
            }
        }
    }
    q
}

pub fn toy_optimal_policy() -> [usize; 2] {
    let q = toy_value_iteration();
    let best = |row: &[f64; 3]| (0..3).fold(0, |b, a| if row[a] > row[b] { a } else { b });
    [best(&q[0]), best(&q[1])]
}

/// Largest relative gap between analytic and central-difference
/// gradients over every parameter of `net` on `batch`.
pub fn max_gradient_error(net: &DenseNet, batch: &[Sample<'_>], h: f64) -> f64 {
    let (_, grads) = net.loss_and_gradients(batch).unwrap();
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for (li, g) in grads.layers.iter().enumerate() {
        for (idx, &analytic) in g.weights.indexed_iter() {
            let orig = probe.layers()[li].weights[idx];
            probe.layers_mut()[li].weights[idx] = orig + h;
            let up = probe.loss(batch).unwrap();
            probe.layers_mut()[li].weights[idx] = orig - h;
            let down = probe.loss(batch).unwrap();
            probe.layers_mut()[li].weights[idx] = orig;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        }
        for (idx, &analytic) in g.bias.indexed_iter() {
            let orig = probe.layers()[li].bias[idx];
            probe.layers_mut()[li].bias[idx] = orig + h;
            let up = probe.loss(batch).unwrap();
            probe.layers_mut()[li].bias[idx] = orig - h;
            let down = probe.loss(batch).unwrap();
            probe.layers_mut()[li].bias[idx] = orig;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        }
    }
    worst
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Random nets with 1 or 2 hidden layers, random biases and a random minibatch.
pub fn gradient_check_case(seed: u64) -> (DenseNet, Vec<Vec<f64>>, Vec<(usize, f64)>) {
    let mut r = rng(seed);
    let input = r.gen_range(2..6);
    let mut sizes = vec![input];
    for _ in 0..r.gen_range(1..=2) {
        sizes.push(r.gen_range(3..9));
    }
    sizes.push(3);
    let mut net = DenseNet::init(&sizes, seed).unwrap();
    // nonzero biases keep pre-activations off the ReLU kink
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| r.gen_range(-0.5..0.5));
    }
    let k = r.gen_range(1..6);
    let inputs: Vec<Vec<f64>> = (0..k).map(|_| (0..input).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let targets = (0..k).map(|_| (r.gen_range(0..3), r.gen_range(-1.0..1.0))).collect();
    (net, inputs, targets)
}

/// Tabular Q-learning (alpha 0.5) on the toy MDP driven by uniform random actions.
pub fn toy_tabular_agent(seed: u64) -> TabularQAgent {
    let cfg = TabularConfig { alpha: 0.5, gamma: TOY_GAMMA, ..Default::default() };
    let mut agent = TabularQAgent::new(cfg, seed, 0).unwrap();
    let mut r = rng(seed + 1000);
    let mut s = 0usize;
    for _ in 0..20_000 {
        let a = r.gen_range(0..3);
        let next = TOY_NEXT[s][a];
        agent.learn_tabular(toy_key(s), OperativeMode::ALL[a], TOY_REWARD[s][a], toy_key(next), false);
        s = next;
    }
    agent
}

pub fn toy_key(s: usize) -> [u8; 4] {
    [s as u8, 0, 0, 0]
}

pub fn toy_obs(s: usize) -> Vec<f64> {
    if s == 0 {
        vec![1.0, 0.0]
    } else {
        vec![0.0, 1.0]
    }
}

/// DQN agent trained from replay on the toy MDP with one-hot observations.
pub fn toy_ddrl_agent(seed: u64) -> DdrlAgent {
    let cfg = DdrlConfig {
        gamma: TOY_GAMMA,
        hidden: vec![32, 32],
        minibatch: 32,
        replay_capacity: 2000,
        optimizer: OptimizerConfig { learning_rate: 0.005, momentum: 0.9, lr_decay: 0.0, ..Default::default() },
        ..Default::default()
    };
    let mut agent = DdrlAgent::new(cfg, 2, seed, 0).unwrap();
    let mut r = rng(100 + seed);
    let mut s = 0usize;
    for _ in 0..6000 {
        let a = r.gen_range(0..3);
        let next = TOY_NEXT[s][a];
        agent
            .store(Transition {
                obs: toy_obs(s),
                action: OperativeMode::ALL[a],
                reward: TOY_REWARD[s][a],
                next_obs: toy_obs(next),
                terminal: false,
            })
            .unwrap();
        agent.learn().unwrap();
        s = next;
    }
    agent
}

pub struct BruteForceCase {
    pub n_cells: usize,
    pub horizon: usize,
    pub bins: usize,
    pub dp: f64,
    pub brute: f64,
    pub replay: f64,
}

/// Random small instances solved by the DP, by exhaustive enumeration
/// and by replaying the DP policy.
pub fn brute_force_cases(seed: u64, count: usize) -> Vec<BruteForceCase> {
    let mut r = rng(seed);
    (0..count)
        .map(|case| {
            let n = if case % 2 == 0 { 1 } else { 2 };
            let (cfg, traces) = random_instance(&mut r, n);
            let horizon = if n == 1 { r.gen_range(1..=8) } else { r.gen_range(1..=5) };
            let bins = r.gen_range(2..=11);
            let dp = DpConfig { n_cells: n, battery_bins: bins, horizon, weight: cfg.weight };
            let solution = solve(&traces, &dp, &cfg).unwrap();
            let grid = BatteryGrid::new(bins, cfg.battery.capacity).unwrap();
            BruteForceCase {
                n_cells: n,
                horizon,
                bins,
                dp: solution.total_cost,
                brute: brute_force_min(&cfg, &traces, grid, horizon),
                replay: solution.rollout(&cfg, &traces).unwrap().total_cost(),
            }
        })
        .collect()
}
