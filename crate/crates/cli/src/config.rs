//! Config loading: TOML file, then dotted `key=value` overrides, then
//! strict deserialization so misspelled keys fail loudly.

use std::fs;
use std::path::Path;

use splitctl_core::harness::ExperimentConfig;
use toml::{Table, Value};

use crate::CliError;

pub const SNAPSHOT_FILE: &str = "resolved_config.toml";

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for setting in overrides {
        apply_override(&mut root, setting)?;
    }
    let cfg: ExperimentConfig = Value::Table(root).try_into().map_err(|e| CliError::Config(format!("{e}")))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Sets `a.b.c=value`, creating intermediate tables. The value is read as
/// a TOML literal, falling back to a bare string.
pub fn apply_override(root: &mut Table, setting: &str) -> Result<(), CliError> {
    let (key, raw) = setting
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{setting}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for part in path {
        let entry = table.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String, CliError> {
    toml::to_string_pretty(cfg).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
}

/// Writes the snapshot; an existing identical snapshot is left alone, a
/// different one needs `force`.
pub fn write_snapshot(cfg: &ExperimentConfig, dir: &Path, force: bool) -> Result<(), CliError> {
    let text = to_toml(cfg)?;
    let path = dir.join(SNAPSHOT_FILE);
    if let Ok(existing) = fs::read_to_string(&path) {
        if existing == text {
            return Ok(());
        }
        if !force {
            return Err(CliError::Runtime(format!(
                "{} exists with a different configuration; pass --force to overwrite",
                path.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
