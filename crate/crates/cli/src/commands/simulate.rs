use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use flexmod::ddpg::AgentCheckpoint;
use flexmod::fedsim::{run_experiment, ModelCheckpoint};

use super::load_config;
use crate::output::{self, Summary};

/// Runs the configured experiment and writes its files to the output
/// directory, which is returned together with the summary.
pub fn run(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(PathBuf, Summary)> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.run.seed = s;
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.run.output_dir = Some(dir.clone());
    let result = run_experiment(&config)?;

    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let m = config.num_modalities();
    output::write_rounds(&dir.join("rounds.csv"), &result.records, m)?;
    output::write_allocations(
        &dir.join("allocations.csv"),
        &result.records,
        config.schedule.table(m)?.times(),
    )?;
    let summary = output::summary(&result, &config)?;
    output::write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join("model.json"), ModelCheckpoint::to_json(&result.final_model)?)?;
    if let Some(agent) = &result.agent {
        fs::write(dir.join("agent.json"), AgentCheckpoint::to_json(agent)?)?;
    }
    Ok((dir, summary))
}
