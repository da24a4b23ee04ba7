//! Scenario configuration files.
//!
//! A config file is TOML: top-level scenario keys, then optional
//! `[adversary]` and `[detection]` sections. Any key can be overridden from
//! the command line with `--set key=value` (`--set adversary.gamma_adv=5`).

use std::path::Path;

use toml::{Table, Value};

use super::CliError;
use crate::sim::ScenarioConfig;

/// Short names accepted on the command line.
pub fn canonical_key(key: &str) -> &str {
    match key {
        "N" | "n" | "neighbors" => "n_nodes",
        "v" | "votes" | "votes_needed" => "detection.votes_needed",
        other => other,
    }
}

/// Parses an override value as a TOML scalar, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::config(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// Applies `key=value` overrides on top of `config`.
pub fn apply_overrides(
    config: &ScenarioConfig,
    overrides: &[String],
) -> Result<ScenarioConfig, CliError> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut table = Table::try_from(config).map_err(|e| CliError::config(e.to_string()))?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| {
            CliError::config(format!("override `{o}` is not of the form key=value"))
        })?;
        set_path(&mut table, canonical_key(k.trim()), parse_value(v))?;
    }
    let text = toml::to_string(&table).map_err(|e| CliError::config(e.to_string()))?;
    toml::from_str::<ScenarioConfig>(&text)
        .map_err(|e| CliError::config(format!("in --set overrides: {}", e.message())))
}

/// Line (1-based) of `field` in the config text, honoring `[section]` headers.
fn locate_key(text: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses config text. Errors carry the offending line.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        match line {
            Some(l) => CliError::config(format!("{origin}:{l}: {}", e.message())),
            None => CliError::config(format!("{origin}: {}", e.message())),
        }
    })?;
    config
        .validate()
        .map_err(|e| match locate_key(text, &e.field) {
            Some(l) => CliError::config(format!("{origin}:{l}: {e}")),
            None => CliError::config(format!("{origin}: {e}")),
        })?;
    Ok(config)
}

/// Loads the file (if any), applies overrides and the seed, and validates.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<ScenarioConfig, CliError> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text, &p.display().to_string())?
        }
        None => ScenarioConfig::default(),
    };
    let mut config = apply_overrides(&base, overrides)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(config)
}
