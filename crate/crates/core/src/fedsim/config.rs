use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::ModelConfig;
use super::train::SlotMode;
use crate::ddpg::DdpgConfig;
use crate::error::{Error, Result};
use crate::scheduler::{Combination, CombinationTable};

/// How each round's allocation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Flexmod,
    /// Only the full combination, as many slots as fit.
    EntireUpdate,
    /// Only modality `m` (1-based), as many slots as fit.
    SingleModality(usize),
    /// The flexmod solver with a constant `β` and no agent.
    FixedBeta(f64),
}

impl StrategyKind {
    pub fn validate(&self, num_modalities: usize) -> Result<()> {
        match *self {
            StrategyKind::SingleModality(m) if m == 0 || m > num_modalities => Err(Error::config(
                "schedule.strategy",
                format!("single_modality index {m} outside 1..={num_modalities}"),
            )),
            StrategyKind::FixedBeta(b) if !(0.0..=1.0).contains(&b) => Err(Error::config(
                "schedule.strategy",
                format!("fixed_beta value {b} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Flexmod => write!(f, "flexmod"),
            StrategyKind::EntireUpdate => write!(f, "entire_update"),
            StrategyKind::SingleModality(m) => write!(f, "single_modality:{m}"),
            StrategyKind::FixedBeta(b) => write!(f, "fixed_beta:{b}"),
        }
    }
}

/// Parses `flexmod`, `entire_update`, `single_modality:M` and `fixed_beta:B`.
impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("strategy", format!("unknown strategy `{s}`"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (name, arg) {
            ("flexmod", None) => Ok(StrategyKind::Flexmod),
            ("entire_update", None) => Ok(StrategyKind::EntireUpdate),
            ("single_modality", Some(a)) => a.parse().map(StrategyKind::SingleModality).map_err(|_| bad()),
            ("fixed_beta", Some(a)) => a.parse().map(StrategyKind::FixedBeta).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub num_classes: usize,
    pub dims: Vec<usize>,
    pub informativeness: Vec<f64>,
    #[serde(default = "default_samples_per_client")]
    pub samples_per_client: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_components")]
    pub components_per_class: usize,
}

fn default_samples_per_client() -> usize {
    600
}
fn default_noise() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    3.0
}
fn default_components() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// One file per modality, rows aligned.
    pub paths: Vec<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    #[serde(default = "default_clients")]
    pub clients: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_clients() -> usize {
    10
}
fn default_alpha() -> f64 {
    10.0
}
fn default_validation_fraction() -> f64 {
    0.01
}

impl DatasetConfig {
    pub fn num_modalities(&self) -> usize {
        match &self.source {
            DataSource::Synthetic(s) => s.dims.len(),
            DataSource::Csv(c) => c.paths.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Unit time per combination, keyed by 1-based member lists such as
    /// `"1"`, `"2"` and `"1,2"`.
    pub times: BTreeMap<String, u32>,
    /// Per-round time budget `T`.
    pub budget: u32,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub slot_mode: SlotMode,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Applied once per round.
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_lr_floor")]
    pub lr_floor: f64,
}

fn default_strategy() -> StrategyKind {
    StrategyKind::Flexmod
}
fn default_batch_size() -> usize {
    64
}
fn default_lr() -> f64 {
    0.005
}
fn default_lr_decay() -> f64 {
    0.99
}
fn default_lr_floor() -> f64 {
    0.001
}

impl ScheduleConfig {
    pub fn table(&self, num_modalities: usize) -> Result<CombinationTable> {
        let mut map = BTreeMap::new();
        for (key, &t) in &self.times {
            let c = Combination::parse_one_based(key).map_err(|e| Error::config("schedule.times", e.to_string()))?;
            if map.insert(c, t).is_some() {
                return Err(Error::config("schedule.times", format!("combination {c} listed twice")));
            }
        }
        CombinationTable::from_time_map(num_modalities, &map).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::config("schedule.times", msg),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub early_stop: bool,
    /// Overrides `agent.target_accuracy` when set.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Train clients on the rayon pool. Results are identical either way.
    #[serde(default)]
    pub parallel: bool,
    /// Agent checkpoint to start from instead of a fresh agent.
    #[serde(default)]
    pub agent_checkpoint: Option<PathBuf>,
}

fn default_rounds() -> usize {
    30
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rounds: default_rounds(),
            seed: 0,
            early_stop: false,
            target_accuracy: None,
            output_dir: None,
            parallel: false,
            agent_checkpoint: None,
        }
    }
}

/// One JSON document that fully determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub agent: DdpgConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_modalities(&self) -> usize {
        self.dataset.num_modalities()
    }

    pub fn target_accuracy(&self) -> f64 {
        self.run.target_accuracy.unwrap_or(self.agent.target_accuracy)
    }

    /// Agent settings with the run's target accuracy applied.
    pub fn agent_config(&self) -> DdpgConfig {
        DdpgConfig {
            target_accuracy: self.target_accuracy(),
            ..self.agent.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_modalities();
        let d = &self.dataset;
        if m == 0 {
            return Err(Error::config("dataset.source", "at least one modality is required"));
        }
        if d.clients == 0 {
            return Err(Error::config("dataset.clients", "must be positive"));
        }
        if !(d.alpha > 0.0 && d.alpha.is_finite()) {
            return Err(Error::config(
                "dataset.alpha",
                format!("must be positive, got {}", d.alpha),
            ));
        }
        if !(d.validation_fraction > 0.0 && d.validation_fraction < 1.0) {
            return Err(Error::config(
                "dataset.validation_fraction",
                format!("must lie in (0, 1), got {}", d.validation_fraction),
            ));
        }
        if let DataSource::Synthetic(s) = &d.source {
            if s.informativeness.len() != m {
                return Err(Error::config(
                    "dataset.source.synthetic.informativeness",
                    format!("{} values for {m} modalities", s.informativeness.len()),
                ));
            }
            if let Some(v) = s.informativeness.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::config(
                    "dataset.source.synthetic.informativeness",
                    format!("{v} outside [0, 1]"),
                ));
            }
            if s.dims.contains(&0) {
                return Err(Error::config(
                    "dataset.source.synthetic.dims",
                    "dimensions must be positive",
                ));
            }
            if s.num_classes < 2 {
                return Err(Error::config(
                    "dataset.source.synthetic.num_classes",
                    "need at least 2 classes",
                ));
            }
            if s.samples_per_client == 0 {
                return Err(Error::config(
                    "dataset.source.synthetic.samples_per_client",
                    "must be positive",
                ));
            }
            if s.components_per_class == 0 {
                return Err(Error::config(
                    "dataset.source.synthetic.components_per_class",
                    "must be positive",
                ));
            }
        }
        if self.model.feature_dim == 0 {
            return Err(Error::config("model.feature_dim", "must be positive"));
        }
        if self.model.encoder_hidden.len() > m {
            return Err(Error::config(
                "model.encoder_hidden",
                format!(
                    "{} encoder width lists for {m} modalities",
                    self.model.encoder_hidden.len()
                ),
            ));
        }
        if self
            .model
            .encoder_hidden
            .iter()
            .chain([&self.model.header_hidden])
            .flatten()
            .any(|&w| w == 0)
        {
            return Err(Error::config("model", "layer widths must be positive"));
        }
        let s = &self.schedule;
        s.table(m)?;
        s.strategy.validate(m)?;
        if s.batch_size == 0 {
            return Err(Error::config("schedule.batch_size", "must be positive"));
        }
        crate::nn::SgdConfig::new(s.learning_rate, s.lr_decay, s.lr_floor)
            .map_err(|e| Error::config("schedule.learning_rate", e.to_string()))?;
        self.agent_config().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            StrategyKind::Flexmod,
            StrategyKind::EntireUpdate,
            StrategyKind::SingleModality(2),
            StrategyKind::FixedBeta(0.25),
        ] {
            assert_eq!(s.to_string().parse::<StrategyKind>().unwrap(), s);
        }
        assert!("greedy".parse::<StrategyKind>().is_err());
        assert!("single_modality:x".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn strategy_json_forms() {
        let s: StrategyKind = serde_json::from_str(r#"{"single_modality": 1}"#).unwrap();
        assert_eq!(s, StrategyKind::SingleModality(1));
        let s: StrategyKind = serde_json::from_str(r#""entire_update""#).unwrap();
        assert_eq!(s, StrategyKind::EntireUpdate);
    }
}
