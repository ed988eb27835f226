use std::path::Path;

use anyhow::{Context, Result};
use flexmod::fedsim::{ExperimentData, ModelCheckpoint};
use flexmod::importance::{normalize_importance, value_cache};
use serde::Serialize;

use super::load_config;
use crate::usage;

#[derive(Debug, Serialize)]
pub struct ShapleyReport {
    /// Validation loss with only the listed modalities present; `""` is the
    /// empty coalition.
    pub subsets: Vec<(String, f64)>,
    pub raw: Vec<f64>,
    /// `None` when no modality lowers the loss.
    pub normalized: Option<Vec<f64>>,
    pub efficiency_residual: f64,
}

pub fn run(config_path: &Path, checkpoint: &Path) -> Result<ShapleyReport> {
    let config = load_config(config_path)?;
    let text = std::fs::read_to_string(checkpoint).with_context(|| format!("cannot read {}", checkpoint.display()))?;
    let model = ModelCheckpoint::from_json(&text).map_err(|e| usage(e.to_string()))?;
    let data = ExperimentData::load(&config)?;
    let dims: Vec<usize> = model.encoders.iter().map(|e| e.input_dim()).collect();
    if dims != data.dims || model.num_classes() != data.num_classes {
        return Err(usage(format!(
            "checkpoint expects inputs {dims:?} and {} classes; the configured data has {:?} and {}",
            model.num_classes(),
            data.dims,
            data.num_classes
        )));
    }
    let cache = value_cache(&model, &data.validation)?;
    let raw = cache.shapley();
    Ok(ShapleyReport {
        subsets: cache.entries().map(|(s, v)| (s.label(), v)).collect(),
        normalized: normalize_importance(&raw).ok().map(|v| v.values().to_vec()),
        efficiency_residual: cache.efficiency_residual(&raw),
        raw,
    })
}
