use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use super::dataset::MultimodalDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClientShard {
    pub client: usize,
    /// Sorted, duplicate-free row indices into the source dataset.
    pub indices: Vec<usize>,
}

impl ClientShard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Result of [`partition_dirichlet_detailed`]: the equalized shards plus the
/// shard sizes the Dirichlet draw produced before equalization.
#[derive(Debug, Clone)]
pub struct Partition {
    pub shards: Vec<ClientShard>,
    pub natural_sizes: Vec<usize>,
}

pub fn partition_dirichlet(
    dataset: &MultimodalDataset,
    clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<ClientShard>> {
    Ok(partition_dirichlet_detailed(dataset, clients, alpha, seed)?.shards)
}

/// Label-skewed split: for every class, the share each client receives is
/// drawn from `Dirichlet(alpha, …, alpha)`. Shards are then brought to the
/// common size `⌊n / clients⌋` by moving randomly chosen surplus rows from
/// over-full shards into under-full ones, so shards stay disjoint.
pub fn partition_dirichlet_detailed(
    dataset: &MultimodalDataset,
    clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Partition> {
    if clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let n = dataset.num_samples();
    if n < clients {
        return Err(Error::invalid(format!(
            "{n} samples cannot fill {clients} non-empty shards"
        )));
    }
    let mut rng = seeded(seed);
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(e.to_string()))?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); clients];
    for rows in by_class.iter_mut() {
        rows.shuffle(&mut rng);
        let mut weights: Vec<f64> = (0..clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            // All draws underflowed (tiny alpha): the class goes to one client.
            weights = vec![0.0; clients];
            weights[rng.random_range(0..clients)] = 1.0;
        }
        let mut start = 0;
        let mut cum = 0.0;
        for (c, w) in weights.iter().enumerate() {
            cum += w;
            let end = if c + 1 == clients {
                rows.len()
            } else {
                ((cum * rows.len() as f64).round() as usize).clamp(start, rows.len())
            };
            shards[c].extend_from_slice(&rows[start..end]);
            start = end;
        }
    }

    let natural_sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
    let target = n / clients;

    let mut pool = Vec::new();
    for shard in shards.iter_mut() {
        if shard.len() > target {
            shard.shuffle(&mut rng);
            pool.extend(shard.drain(target..));
        }
    }
    pool.sort_unstable();
    pool.shuffle(&mut rng);
    for shard in shards.iter_mut() {
        while shard.len() < target {
            // The pool always holds at least the total deficit.
            shard.push(pool.pop().expect("surplus rows cover every deficit"));
        }
    }

    let shards = shards
        .into_iter()
        .enumerate()
        .map(|(client, mut indices)| {
            indices.sort_unstable();
            ClientShard { client, indices }
        })
        .collect();
    Ok(Partition { shards, natural_sizes })
}
