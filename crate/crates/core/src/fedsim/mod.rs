//! Round-driven simulation of federated training with per-round modality
//! scheduling, plus the baseline strategies.

mod config;
mod indices;
mod model;
mod run;
mod train;

pub use config::{
    CsvSource, DataSource, DatasetConfig, ExperimentConfig, RunConfig, ScheduleConfig, StrategyKind, SyntheticSource,
};
pub use indices::{client_prototypes, compute_indices, RoundIndices};
pub use model::{forward_full, GlobalModel, ModelCheckpoint, ModelConfig, RecordedPass};
pub use run::{
    rounds_to_target, run_experiment, run_simulation, ExperimentData, ExperimentResult, RoundRecord, RunHooks,
    Simulation,
};
pub use train::{aggregate, evaluate, local_train, LocalOutcome, LocalTrainConfig, SlotMode};
