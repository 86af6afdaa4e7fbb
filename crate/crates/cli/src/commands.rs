use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use splitctl_core::bound::{solve, BoundError, DpConfig};
use splitctl_core::env::{generate_traces, BatteryDynamics, BatteryGrid, EnvError};
use splitctl_core::harness::{
    self, evaluate as run_eval, grid_connected, load_traces, read_bundle, report_row, train_to_dir, ExperimentConfig,
    HarnessError, ReportInput,
};

use crate::config::{load, write_snapshot};
use crate::{CliError, Common};

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => CliError::Config(e.to_string()),
            HarnessError::Bundle(_) | HarnessError::Json(_) | HarnessError::Csv(_) => CliError::Schema(e.to_string()),
            HarnessError::Env(env) => env.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Schema(_) | EnvError::Csv(_) => CliError::Schema(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Domain(_) => CliError::Config(e.to_string()),
            BoundError::Env(env) => env.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Resolves the config, applies `--out` and writes the snapshot.
fn setup(common: &Common, tweak: impl FnOnce(&mut ExperimentConfig)) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = load(common.config.as_deref(), &common.overrides)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    tweak(&mut cfg);
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    write_snapshot(&cfg, &dir, common.force)?;
    Ok((cfg, dir))
}

fn create(path: &Path, force: bool) -> Result<BufWriter<File>, CliError> {
    if path.exists() && !force {
        return Err(CliError::Runtime(format!("{} exists; pass --force to overwrite", path.display())));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| runtime(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| runtime(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path, force: bool) -> Result<(), CliError> {
    let mut w = create(path, force)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| runtime(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| runtime(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| runtime(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

pub fn gen_traces(common: &Common, seed: Option<u64>) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |c| {
        if let Some(s) = seed {
            c.seeds.trace_seed = s;
        }
    })?;
    let traces = generate_traces(&cfg.env, cfg.seeds.trace_seed)?;
    let path = dir.join("traces.csv");
    let mut w = create(&path, common.force)?;
    traces.write_csv(&mut w)?;
    w.flush().map_err(|e| runtime(&path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn train(common: &Common, seed: Option<u64>) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |c| {
        if let Some(s) = seed {
            c.seeds.agent_seed = s;
        }
    })?;
    let traces = load_traces(&cfg, cfg.seeds.trace_seed)?;
    let outcome = train_to_dir(&cfg, &traces, &dir, common.force)?;
    for e in &outcome.episodes {
        eprintln!(
            "episode {:>3}  reward {:>9.2}  grid {:>9.1} kWh  drop {:>7.4}%  eps {:.4}",
            e.episode,
            e.cum_reward,
            e.grid_kwh,
            100.0 * e.mean_drop,
            e.eps
        );
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn rollout(
    cfg: &ExperimentConfig,
    dir: &Path,
    checkpoint: &Path,
    trace_seed: u64,
    epsilon: f64,
    dynamics: BatteryDynamics,
    name: &str,
    force: bool,
) -> Result<(), CliError> {
    let bundle = read_bundle(checkpoint).map_err(|e| match e {
        HarnessError::Io(io) => runtime(checkpoint, io),
        other => CliError::Schema(format!("{}: {other}", checkpoint.display())),
    })?;
    let traces = load_traces(cfg, trace_seed)?;
    let metrics_path = dir.join(format!("{name}_metrics.jsonl"));
    let mut metrics = create(&metrics_path, force)?;
    let summary = run_eval(&bundle, &cfg.env, &traces, epsilon, dynamics, &mut |r| {
        serde_json::to_writer(&mut metrics, r)?;
        metrics.write_all(b"\n")?;
        Ok(())
    })?;
    metrics.flush().map_err(|e| runtime(&metrics_path, e))?;
    let path = dir.join(format!("{name}_summary.json"));
    write_json(&summary, &path, force)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

pub fn evaluate(
    common: &Common,
    checkpoint: Option<&Path>,
    epsilon: f64,
    quantized: bool,
    grid: bool,
) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |_| {})?;
    if grid {
        let traces = load_traces(&cfg, cfg.seeds.trace_seed)?;
        let summary = grid_connected(&cfg.env, &traces)?;
        write_json(&summary, &dir.join("grid_connected_summary.json"), common.force)?;
        println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        return Ok(());
    }
    let checkpoint = checkpoint.ok_or_else(|| CliError::Usage("--checkpoint is required".into()))?;
    let (dynamics, name) = if quantized {
        let g = BatteryGrid::new(cfg.bound.battery_bins, cfg.env.battery.capacity)?;
        (BatteryDynamics::Quantized(g), "eval_quantized")
    } else {
        (BatteryDynamics::Continuous, "eval")
    };
    rollout(&cfg, &dir, checkpoint, cfg.seeds.trace_seed, epsilon, dynamics, name, common.force)
}

pub fn validate(common: &Common, checkpoint: &Path) -> Result<(), CliError> {
    let (mut cfg, dir) = setup(common, |_| {})?;
    // a trace file stands for the training traces; validation always
    // draws fresh synthetic ones
    cfg.trace_file = None;
    let seed = cfg.seeds.validation_trace_seed;
    rollout(
        &cfg,
        &dir,
        checkpoint,
        seed,
        cfg.validation_epsilon,
        BatteryDynamics::Continuous,
        "validation",
        common.force,
    )
}

pub fn bound(common: &Common) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |_| {})?;
    let traces = load_traces(&cfg, cfg.seeds.trace_seed)?;
    let mut dp = DpConfig::for_env(&cfg.env);
    dp.battery_bins = cfg.bound.battery_bins;
    if cfg.bound.horizon > 0 {
        dp.horizon = cfg.bound.horizon;
    }
    let policy_path = dir.join("dp_policy.csv");
    let summary_path = dir.join("dp_summary.json");
    for p in [&policy_path, &summary_path] {
        if p.exists() && !common.force {
            return Err(CliError::Runtime(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    let solution = solve(&traces, &dp, &cfg.env)?;
    let trajectory = solution.rollout(&cfg.env, &traces)?;
    let mut w = create(&policy_path, common.force)?;
    solution.write_policy_csv(&mut w, (!cfg.bound.full_policy).then_some(&trajectory))?;
    w.flush().map_err(|e| runtime(&policy_path, e))?;
    let summary = trajectory.summary(&solution);
    let mut w = create(&summary_path, common.force)?;
    let line = serde_json::to_string(&summary).expect("summary serializes");
    writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| runtime(&summary_path, e))?;
    println!("{line}");
    Ok(())
}

fn report_input(path: &Path) -> Result<ReportInput, CliError> {
    let mut input: ReportInput = read_json(path)?;
    if input.label.is_empty() {
        input.label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(input)
}

fn write_report(rows: &[harness::ReportRow], path: &Path, force: bool) -> Result<(), CliError> {
    let mut file = csv::Writer::from_writer(create(path, force)?);
    for r in rows {
        file.serialize(r).map_err(|e| runtime(path, e))?;
    }
    file.flush().map_err(|e| runtime(path, e))?;
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    for r in rows {
        out.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn cost(common: &Common, summary: &Path, grid: bool) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |_| {})?;
    let mut input = report_input(summary)?;
    if grid {
        input.harvesting = false;
    }
    let row = report_row(&input, &cfg.cost)?;
    write_report(&[row], &dir.join("cost.csv"), common.force)
}

pub fn report(common: &Common, summaries: &[PathBuf]) -> Result<(), CliError> {
    let (cfg, dir) = setup(common, |_| {})?;
    let rows = summaries
        .iter()
        .map(|p| report_input(p).and_then(|i| report_row(&i, &cfg.cost).map_err(CliError::from)))
        .collect::<Result<Vec<_>, _>>()?;
    write_report(&rows, &dir.join("report.csv"), common.force)
}
