//! Experiment config files: TOML, or JSON for files ending in `.json`.

use std::path::Path;

use dsag_core::ExperimentConfig;

use crate::error::{CliError, CliResult};

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let is_json = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let config = if is_json {
        parse_json(&raw)
    } else {
        parse_toml(&raw)
    }
    .map_err(|msg| CliError::usage(format!("{}: {msg}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Parses a TOML config; errors name the offending field path.
pub fn parse_toml(raw: &str) -> Result<ExperimentConfig, String> {
    let de = toml::Deserializer::parse(raw).map_err(|e| e.to_string())?;
    serde_path_to_error::deserialize(de).map_err(|e| describe(e.path().to_string(), e.inner()))
}

pub fn parse_json(raw: &str) -> Result<ExperimentConfig, String> {
    let mut de = serde_json::Deserializer::from_str(raw);
    serde_path_to_error::deserialize(&mut de).map_err(|e| describe(e.path().to_string(), e.inner()))
}

fn describe(path: String, inner: &dyn std::fmt::Display) -> String {
    let inner = inner.to_string();
    let inner = inner.trim_end();
    if path == "." || path.is_empty() {
        format!("invalid config: {inner}")
    } else {
        format!("invalid config at `{path}`: {inner}")
    }
}
