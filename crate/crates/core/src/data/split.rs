use rand::seq::SliceRandom;

use super::dataset::MultimodalDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Stratified hold-out of `round(fraction · n)` rows for the server.
pub fn split_validation(
    dataset: &MultimodalDataset,
    fraction: f64,
    seed: u64,
) -> Result<(MultimodalDataset, MultimodalDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let count = (fraction * dataset.num_samples() as f64).round() as usize;
    split_validation_count(dataset, count, seed)
}

/// Stratified hold-out of exactly `count` rows. Per-class quotas follow the
/// class proportions, rounded by largest remainder (ties to the lower class).
pub fn split_validation_count(
    dataset: &MultimodalDataset,
    count: usize,
    seed: u64,
) -> Result<(MultimodalDataset, MultimodalDataset)> {
    let n = dataset.num_samples();
    let counts = dataset.class_counts();
    let quotas = stratified_quotas(&counts, count);
    for (k, (&q, &c)) in quotas.iter().zip(&counts).enumerate() {
        if q == 0 {
            return Err(Error::invalid(format!(
                "validation size {count} leaves class {k} without a validation sample"
            )));
        }
        if q >= c {
            return Err(Error::invalid(format!(
                "validation size {count} leaves class {k} without a training sample"
            )));
        }
    }

    let mut rng = seeded(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut val = Vec::with_capacity(count);
    let mut train = Vec::with_capacity(n - count);
    for (rows, &q) in by_class.iter_mut().zip(&quotas) {
        rows.shuffle(&mut rng);
        val.extend_from_slice(&rows[..q]);
        train.extend_from_slice(&rows[q..]);
    }
    val.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&val)?))
}

fn stratified_quotas(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts.iter().map(|&c| total as f64 * c as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total.saturating_sub(quotas.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for k in order {
        if rest == 0 {
            break;
        }
        quotas[k] += 1;
        rest -= 1;
    }
    quotas
}
