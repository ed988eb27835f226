use serde::{Deserialize, Serialize};

use super::model::GlobalModel;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::importance::{normalize_importance, value_cache, ImportanceVector};
use crate::prototype::{
    global_prototypes, local_prototypes, normalize_prototype, normalize_quality, raw_quality, QualityVector,
};

/// Quality and importance vectors for one global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundIndices {
    pub quality: QualityVector,
    pub importance: ImportanceVector,
    /// Set when the quality vector fell back to uniform.
    pub quality_fallback: bool,
    /// Set when the importance vector fell back to uniform.
    pub importance_fallback: bool,
}

fn degenerate(e: &Error) -> bool {
    matches!(e, Error::ZeroVector(_) | Error::MissingPrototypes(_))
}

/// Normalized local prototypes of every client, as uploaded to the server.
pub fn client_prototypes(
    model: &GlobalModel,
    shards: &[Batch],
    num_classes: usize,
) -> Result<Vec<Vec<crate::prototype::Prototype>>> {
    shards
        .iter()
        .map(|shard| {
            local_prototypes(&model.encoders, shard, num_classes)?
                .iter()
                .map(normalize_prototype)
                .collect()
        })
        .collect()
}

fn quality(model: &GlobalModel, shards: &[Batch], num_classes: usize) -> Result<QualityVector> {
    let locals = client_prototypes(model, shards, num_classes)?;
    let globals = global_prototypes(&locals, model.num_modalities(), num_classes)?;
    normalize_quality(&raw_quality(&globals, model.num_modalities())?)
}

fn importance(model: &GlobalModel, validation: &Batch) -> Result<ImportanceVector> {
    normalize_importance(&value_cache(model, validation)?.shapley())
}

/// Computes both vectors. A degenerate vector (dead encoder, missing class,
/// nothing positive after clamping) is replaced by `1/√M` everywhere.
pub fn compute_indices(
    model: &GlobalModel,
    shards: &[Batch],
    validation: &Batch,
    num_classes: usize,
) -> Result<RoundIndices> {
    let m = model.num_modalities();
    let (quality, quality_fallback) = match quality(model, shards, num_classes) {
        Ok(q) => (q, false),
        Err(e) if degenerate(&e) => (QualityVector::uniform(m), true),
        Err(e) => return Err(e),
    };
    let (importance, importance_fallback) = match importance(model, validation) {
        Ok(g) => (g, false),
        Err(e) if degenerate(&e) => (ImportanceVector::uniform(m), true),
        Err(e) => return Err(e),
    };
    Ok(RoundIndices {
        quality,
        importance,
        quality_fallback,
        importance_fallback,
    })
}
