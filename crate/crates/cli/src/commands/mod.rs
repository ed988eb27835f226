use std::path::Path;

use anyhow::{Context, Result};
use flexmod::fedsim::ExperimentConfig;

pub mod bound;
pub mod compare;
pub mod schedule;
pub mod shapley;
pub mod simulate;

pub(crate) fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::usage(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub(crate) fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| crate::usage(format!("bad {what} entry `{s}`"))))
        .collect()
}
