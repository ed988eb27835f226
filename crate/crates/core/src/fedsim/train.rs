use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::GlobalModel;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, Graph, MlpParams, SgdConfig};
use crate::scheduler::{GradientTrace, Schedule};

/// Work done by one schedule slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMode {
    /// One pass over the shard in shuffled minibatches.
    #[default]
    Sweep,
    /// A single shuffled minibatch.
    Minibatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTrainConfig {
    pub batch_size: usize,
    pub slot_mode: SlotMode,
    pub sgd: SgdConfig,
}

/// A client's model after local training plus the per-step encoder gradient
/// norms it observed.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub model: GlobalModel,
    pub gradient_norms: GradientTrace,
}

fn minibatches<R: Rng + ?Sized>(n: usize, batch_size: usize, mode: SlotMode, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    match mode {
        SlotMode::Sweep => order.chunks(batch_size).map(<[usize]>::to_vec).collect(),
        SlotMode::Minibatch => vec![order[..batch_size.min(n)].to_vec()],
    }
}

fn grad_norm(params: &MlpParams) -> f64 {
    params
        .parameters()
        .filter_map(|t| t.grad())
        .flatten()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Trains a copy of `model` on `shard` slot by slot. Every slot records the
/// full forward pass; the header and the encoders in the slot's combination
/// are updated, the remaining encoders only supply features.
pub fn local_train<R: Rng + ?Sized>(
    model: &GlobalModel,
    shard: &Batch,
    schedule: &Schedule,
    config: &LocalTrainConfig,
    rng: &mut R,
) -> Result<LocalOutcome> {
    let mut local = model.clone();
    let mut trace = GradientTrace::default();
    if schedule.is_empty() {
        return Ok(LocalOutcome {
            model: local,
            gradient_norms: trace,
        });
    }
    if shard.is_empty() {
        return Err(Error::Empty("client shard".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    for &combo in &schedule.slots {
        for rows in minibatches(shard.len(), config.batch_size, config.slot_mode, rng) {
            let features = shard
                .features
                .iter()
                .map(|x| x.select_rows(&rows))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<usize> = rows.iter().map(|&r| shard.labels[r]).collect();
            let mut g = Graph::new();
            let pass = local.record(&mut g, &features, combo)?;
            let loss = g.cross_entropy(pass.logits, &labels)?;
            let mut grads = g.backward(loss)?;
            local.header.store_grads(&pass.header, &mut grads)?;
            config.sgd.apply(&mut local.header)?;
            for (enc, bound) in local.encoders.iter_mut().zip(&pass.encoders) {
                if let Some(bound) = bound {
                    enc.store_grads(bound, &mut grads)?;
                    trace.push(grad_norm(enc));
                    config.sgd.apply(enc)?;
                }
            }
        }
    }
    Ok(LocalOutcome {
        model: local,
        gradient_norms: trace,
    })
}

/// Per-parameter arithmetic mean, computed as `x₀ + Σ(xᵢ − x₀)/N` so that
/// averaging identical copies returns them unchanged.
pub fn aggregate(models: &[GlobalModel]) -> Result<GlobalModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::Empty("no client models to aggregate".into()))?;
    if let Some(i) = models.iter().position(|m| !m.same_structure(first)) {
        return Err(Error::invalid(format!(
            "client model {i} differs in structure from client 0"
        )));
    }
    let n = models.len() as f64;
    let mut out = first.clone();
    let mean_into = |target: &mut MlpParams, pick: &dyn Fn(&GlobalModel) -> &MlpParams| {
        for (p, t) in target.parameters_mut().enumerate() {
            let base: Vec<f64> = t.values().to_vec();
            let mut diff = vec![0.0; base.len()];
            for m in models {
                let other = pick(m).parameters().nth(p).expect("same structure");
                for ((d, v), b) in diff.iter_mut().zip(other.values()).zip(&base) {
                    *d += v - b;
                }
            }
            for ((v, d), b) in t.values_mut().iter_mut().zip(diff).zip(base) {
                *v = b + d / n;
            }
            t.clear_grad();
        }
    };
    mean_into(&mut out.header, &|m| &m.header);
    for e in 0..out.encoders.len() {
        mean_into(&mut out.encoders[e], &|m| &m.encoders[e]);
    }
    Ok(out)
}

/// Accuracy (argmax, ties to the lowest class) and mean cross-entropy.
pub fn evaluate(model: &GlobalModel, data: &Batch) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let logits = super::model::forward_full(model, data)?;
    let correct = (0..logits.rows())
        .filter(|&r| {
            let row = logits.row(r);
            let best = row
                .iter()
                .enumerate()
                .fold(0, |best, (k, &v)| if v > row[best] { k } else { best });
            best == data.labels[r]
        })
        .count();
    let loss = cross_entropy(&logits, &data.labels)?.item()?;
    Ok((correct as f64 / data.len() as f64, loss))
}
