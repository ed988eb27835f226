use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, StrategyKind};
use super::indices::{compute_indices, RoundIndices};
use super::model::GlobalModel;
use super::train::{aggregate, evaluate, local_train, LocalOutcome, LocalTrainConfig};
use crate::data::{
    load_csv, partition_dirichlet, split_validation, split_validation_count, synthesize, Batch, MultimodalDataset,
    SynthConfig,
};
use crate::ddpg::{compute_reward, AgentCheckpoint, AgentState, DdpgAgent, Transition};
use crate::error::{Error, Result};
use crate::nn::SgdConfig;
use crate::rng::{stream, stream_seed};
use crate::scheduler::{
    fill_with, order_schedule, solve_allocation, time_cost, AllocationVector, Combination, CombinationTable,
    GradientTrace, Schedule,
};

/// Everything logged about one global round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// `None` for strategies that do not blend.
    pub beta: Option<f64>,
    pub allocation: AllocationVector,
    pub schedule: Schedule,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub quality_fallback: bool,
    pub importance_fallback: bool,
    pub accuracy: f64,
    pub loss: f64,
    pub reward: f64,
    pub budget_used: u64,
    pub budget: u32,
    pub learning_rate: f64,
    /// Largest encoder gradient norm seen by any client this round.
    pub max_grad_norm: Option<f64>,
}

impl RoundRecord {
    pub fn idle_time(&self) -> u64 {
        u64::from(self.budget) - self.budget_used
    }
}

/// Client shards and the server's validation set.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub clients: Vec<Batch>,
    pub validation: Batch,
    pub num_classes: usize,
    pub dims: Vec<usize>,
}

impl ExperimentData {
    pub fn from_dataset(
        dataset: &MultimodalDataset,
        config: &ExperimentConfig,
        validation_count: Option<usize>,
    ) -> Result<Self> {
        let root = config.run.seed;
        let d = &config.dataset;
        let (train, val) = match validation_count {
            Some(c) => split_validation_count(dataset, c, stream_seed(root, "split", &[]))?,
            None => split_validation(dataset, d.validation_fraction, stream_seed(root, "split", &[]))?,
        };
        let shards = partition_dirichlet(&train, d.clients, d.alpha, stream_seed(root, "partition", &[]))?;
        Ok(ExperimentData {
            clients: shards
                .iter()
                .map(|s| train.gather(&s.indices))
                .collect::<Result<Vec<_>>>()?,
            validation: val.as_batch(),
            num_classes: dataset.num_classes(),
            dims: dataset.dims(),
        })
    }

    /// Synthesizes or loads the dataset described by `config`. Synthetic data
    /// gets `clients · samples_per_client` training rows plus the validation
    /// rows on top.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        match &config.dataset.source {
            DataSource::Synthetic(s) => {
                let train = config.dataset.clients * s.samples_per_client;
                let val = ((config.dataset.validation_fraction * train as f64).round() as usize).max(s.num_classes);
                let synth = SynthConfig {
                    num_classes: s.num_classes,
                    dims: s.dims.clone(),
                    samples: train + val,
                    informativeness: s.informativeness.clone(),
                    noise: s.noise,
                    separation: s.separation,
                    components_per_class: s.components_per_class,
                    seed: stream_seed(config.run.seed, "data", &[]),
                };
                let dataset =
                    synthesize(&synth).map_err(|e| Error::config("dataset.source.synthetic", e.to_string()))?;
                Self::from_dataset(&dataset, config, Some(val))
            }
            DataSource::Csv(c) => {
                let dataset = load_csv(&c.paths, &c.label_column)?;
                Self::from_dataset(&dataset, config, None)
            }
        }
    }

    pub fn num_modalities(&self) -> usize {
        self.dims.len()
    }
}

/// Test hook: replace the solver's allocation with slots of one combination
/// while keeping the rest of the strategy (agent included) unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunHooks {
    pub pin_combination: Option<Combination>,
}

/// A running experiment, advanced one round at a time.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ExperimentConfig,
    data: ExperimentData,
    table: CombinationTable,
    hooks: RunHooks,
    model: GlobalModel,
    agent: Option<DdpgAgent>,
    sgd: SgdConfig,
    indices: RoundIndices,
    round: usize,
}

impl Simulation {
    pub fn new(config: ExperimentConfig, hooks: RunHooks) -> Result<Self> {
        config.validate()?;
        let data = ExperimentData::load(&config)?;
        Self::with_data(config, data, hooks)
    }

    pub fn with_data(config: ExperimentConfig, data: ExperimentData, hooks: RunHooks) -> Result<Self> {
        config.validate()?;
        let m = data.num_modalities();
        if m != config.num_modalities() {
            return Err(Error::config(
                "dataset",
                format!("data has {m} modalities, config describes {}", config.num_modalities()),
            ));
        }
        let root = config.run.seed;
        let model = GlobalModel::init(
            &config.model,
            &data.dims,
            data.num_classes,
            &mut stream(root, "init", &[]),
        )?;
        let agent = match config.schedule.strategy {
            StrategyKind::Flexmod => Some(match &config.run.agent_checkpoint {
                Some(path) => {
                    let mut agent = AgentCheckpoint::from_json(&std::fs::read_to_string(path)?)?;
                    if agent.num_modalities() != m {
                        return Err(Error::Checkpoint(format!(
                            "agent was trained for {} modalities, run has {m}",
                            agent.num_modalities()
                        )));
                    }
                    agent.config.target_accuracy = config.target_accuracy();
                    agent
                }
                None => DdpgAgent::new(config.agent_config(), m, &mut stream(root, "agent-init", &[]))?,
            }),
            _ => None,
        };
        let s = &config.schedule;
        let sgd = SgdConfig::new(s.learning_rate, s.lr_decay, s.lr_floor)?;
        let table = s.table(m)?;
        let indices = compute_indices(&model, &data.clients, &data.validation, data.num_classes)?;
        Ok(Simulation {
            config,
            data,
            table,
            hooks,
            model,
            agent,
            sgd,
            indices,
            round: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn data(&self) -> &ExperimentData {
        &self.data
    }

    pub fn model(&self) -> &GlobalModel {
        &self.model
    }

    pub fn agent(&self) -> Option<&DdpgAgent> {
        self.agent.as_ref()
    }

    pub fn indices(&self) -> &RoundIndices {
        &self.indices
    }

    pub fn rounds_done(&self) -> usize {
        self.round
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        evaluate(&self.model, &self.data.validation)
    }

    fn state(indices: &RoundIndices) -> Result<AgentState> {
        AgentState::new(indices.importance.values(), indices.quality.values())
    }

    fn allocate(&mut self, beta: Option<f64>) -> Result<AllocationVector> {
        let budget = self.config.schedule.budget;
        let m = self.table.num_modalities();
        if let Some(c) = self.hooks.pin_combination {
            return Ok(fill_with(&self.table, c, budget));
        }
        match self.config.schedule.strategy {
            StrategyKind::EntireUpdate => Ok(fill_with(&self.table, Combination::full(m), budget)),
            StrategyKind::SingleModality(j) => Ok(fill_with(&self.table, Combination::single(j - 1), budget)),
            StrategyKind::Flexmod | StrategyKind::FixedBeta(_) => {
                let table = self
                    .table
                    .clone()
                    .with_indices(&self.indices.quality, &self.indices.importance)?;
                solve_allocation(&table, beta.expect("blending strategies choose beta"), budget)
            }
        }
    }

    /// One global round: pick `β`, solve and order the allocation, train every
    /// client from the current global model, aggregate, evaluate, refresh the
    /// indices for the new model and let the agent learn from the outcome.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let root = self.config.run.seed;
        let r = self.round as u64;
        let state = Self::state(&self.indices)?;
        let beta = match self.config.schedule.strategy {
            StrategyKind::Flexmod => {
                let agent = self.agent.as_mut().expect("flexmod runs own an agent");
                Some(agent.act(&state, &mut stream(root, "agent-noise", &[r]))?)
            }
            StrategyKind::FixedBeta(b) => Some(b),
            _ => None,
        };
        let allocation = self.allocate(beta)?;
        let schedule = order_schedule(&allocation, &self.table);
        let budget_used = time_cost(&allocation, &self.table);

        let train_cfg = LocalTrainConfig {
            batch_size: self.config.schedule.batch_size,
            slot_mode: self.config.schedule.slot_mode,
            sgd: self.sgd,
        };
        let train_one = |(n, shard): (usize, &Batch)| -> Result<LocalOutcome> {
            let mut rng = stream(root, "batching", &[r, n as u64]);
            local_train(&self.model, shard, &schedule, &train_cfg, &mut rng)
        };
        let outcomes: Vec<LocalOutcome> = if self.config.run.parallel {
            self.data
                .clients
                .par_iter()
                .enumerate()
                .map(train_one)
                .collect::<Result<_>>()?
        } else {
            self.data
                .clients
                .iter()
                .enumerate()
                .map(train_one)
                .collect::<Result<_>>()?
        };
        let mut trace = GradientTrace::default();
        outcomes.iter().for_each(|o| trace.extend(&o.gradient_norms));
        let models: Vec<GlobalModel> = outcomes.into_iter().map(|o| o.model).collect();
        self.model = aggregate(&models)?;

        let (accuracy, loss) = evaluate(&self.model, &self.data.validation)?;
        let reward = compute_reward(accuracy, &self.config.agent_config());
        let next = compute_indices(
            &self.model,
            &self.data.clients,
            &self.data.validation,
            self.data.num_classes,
        )?;
        if let (Some(agent), Some(b)) = (self.agent.as_mut(), beta) {
            agent.remember(Transition::new(state, b, reward, Self::state(&next)?)?)?;
            agent.train(&mut stream(root, "agent-replay", &[r]))?;
        }

        let record = RoundRecord {
            round: self.round + 1,
            beta,
            allocation,
            schedule,
            omega: self.indices.quality.values().to_vec(),
            gamma: self.indices.importance.values().to_vec(),
            quality_fallback: self.indices.quality_fallback,
            importance_fallback: self.indices.importance_fallback,
            accuracy,
            loss,
            reward,
            budget_used,
            budget: self.config.schedule.budget,
            learning_rate: self.sgd.learning_rate,
            max_grad_norm: trace.max(),
        };
        self.indices = next;
        self.sgd = self.sgd.decayed();
        self.round += 1;
        Ok(record)
    }
}

/// Outcome of a complete run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub initial_model: GlobalModel,
    pub initial_accuracy: f64,
    pub final_model: GlobalModel,
    pub agent: Option<DdpgAgent>,
    pub target_accuracy: f64,
}

impl ExperimentResult {
    /// First round whose validation accuracy reaches the target.
    pub fn rounds_to_target(&self) -> Option<usize> {
        rounds_to_target(&self.records, self.target_accuracy)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(self.initial_accuracy, |r| r.accuracy)
    }

    pub fn total_idle_time(&self) -> u64 {
        self.records.iter().map(RoundRecord::idle_time).sum()
    }
}

pub fn rounds_to_target(records: &[RoundRecord], target: f64) -> Option<usize> {
    records.iter().find(|r| r.accuracy >= target).map(|r| r.round)
}

/// Runs `config.run.rounds` rounds, stopping early at the target accuracy if
/// the config asks for it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_simulation(Simulation::new(config.clone(), RunHooks::default())?)
}

pub fn run_simulation(mut sim: Simulation) -> Result<ExperimentResult> {
    let initial_model = sim.model().clone();
    let (initial_accuracy, _) = sim.evaluate()?;
    let target = sim.config().target_accuracy();
    let mut records = Vec::with_capacity(sim.config().run.rounds);
    for _ in 0..sim.config().run.rounds {
        let rec = sim.run_round()?;
        let stop = sim.config().run.early_stop && rec.accuracy >= target;
        records.push(rec);
        if stop {
            break;
        }
    }
    Ok(ExperimentResult {
        records,
        initial_model,
        initial_accuracy,
        final_model: sim.model().clone(),
        agent: sim.agent().cloned(),
        target_accuracy: target,
    })
}
