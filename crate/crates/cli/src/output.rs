//! Files written by `simulate` and `compare`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use flexmod::fedsim::{ExperimentConfig, ExperimentResult, RoundRecord};
use flexmod::scheduler::Combination;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub final_acc: f64,
    pub rounds_to_target: Option<usize>,
    pub rounds: usize,
    pub total_budget_used: u64,
    pub total_idle_time: u64,
    /// SHA-256 of the effective config as compact JSON.
    pub config_hash: String,
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let text = serde_json::to_string(config)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn summary(result: &ExperimentResult, config: &ExperimentConfig) -> Result<Summary> {
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        final_acc: result.final_accuracy(),
        rounds_to_target: result.rounds_to_target(),
        rounds: result.records.len(),
        total_budget_used: result.records.iter().map(|r| r.budget_used).sum(),
        total_idle_time: result.total_idle_time(),
        config_hash: config_hash(config)?,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

/// `round, beta, acc, loss, reward, budget_used, omega_1..M, gamma_1..M,
/// alloc_1..S`; `beta` is empty for strategies without a blend weight.
pub fn write_rounds(path: &Path, records: &[RoundRecord], num_modalities: usize) -> Result<()> {
    let mut w = writer(path)?;
    let s = (1usize << num_modalities) - 1;
    let mut header: Vec<String> = ["round", "beta", "acc", "loss", "reward", "budget_used"]
        .iter()
        .map(|h| h.to_string())
        .collect();
    header.extend((1..=num_modalities).map(|m| format!("omega_{m}")));
    header.extend((1..=num_modalities).map(|m| format!("gamma_{m}")));
    header.extend((1..=s).map(|i| format!("alloc_{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.round.to_string(),
            r.beta.map(|b| b.to_string()).unwrap_or_default(),
            r.accuracy.to_string(),
            r.loss.to_string(),
            r.reward.to_string(),
            r.budget_used.to_string(),
        ];
        row.extend(r.omega.iter().map(f64::to_string));
        row.extend(r.gamma.iter().map(f64::to_string));
        row.extend(r.allocation.counts.iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `round, combination, size, count, time`. `combination` is the
/// bitmask `s` (bit `m − 1` set when modality `m` is a member).
pub fn write_allocations(path: &Path, records: &[RoundRecord], times: &[u32]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["round", "combination", "size", "count", "time"])?;
    for r in records {
        for (i, &count) in r.allocation.counts.iter().enumerate() {
            let c = Combination::from_mask(i as u32 + 1);
            w.write_record([
                r.round.to_string(),
                c.index().to_string(),
                c.len().to_string(),
                count.to_string(),
                (u64::from(count) * u64::from(times[i])).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}
