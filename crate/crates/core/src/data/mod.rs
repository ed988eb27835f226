//! Multimodal datasets: synthesis, CSV ingestion, non-IID partitioning and the
//! server-side validation split.

mod csv_io;
mod dataset;
mod partition;
mod split;
mod synth;

pub use csv_io::{load_csv, read_numeric_csv, NumericTable};
pub use dataset::{Batch, MultimodalDataset};
pub use partition::{partition_dirichlet, partition_dirichlet_detailed, ClientShard, Partition};
pub use split::{split_validation, split_validation_count};
pub use synth::{synthesize, SynthConfig};
