//! Class prototypes and the encoder quality index.
//!
//! A prototype is the mean encoder feature of one class. Clients upload
//! unit-normalized local prototypes, the server averages them per
//! (modality, class), and a modality's quality index is the sum of pairwise
//! cosine similarities of its global prototypes over all ordered pairs, divided
//! by the class count. High values mean poorly separated classes, i.e. an
//! encoder that still needs training.

use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{forward_mlp, MlpParams};
use crate::scheduler::Combination;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub modality: usize,
    pub class: usize,
    pub vector: Vec<f64>,
}

/// Mean feature per (modality, class) over the classes present in `batch`.
/// Absent classes are omitted.
pub fn local_prototypes(encoders: &[MlpParams], batch: &Batch, num_classes: usize) -> Result<Vec<Prototype>> {
    if batch.is_empty() {
        return Err(Error::Empty("prototype shard has no samples".into()));
    }
    if encoders.len() != batch.features.len() {
        return Err(Error::shape("local_prototypes", encoders.len(), batch.features.len()));
    }
    let mut counts = vec![0usize; num_classes];
    for &y in &batch.labels {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: num_classes,
            });
        }
        counts[y] += 1;
    }
    let mut out = Vec::new();
    for (m, (enc, x)) in encoders.iter().zip(&batch.features).enumerate() {
        let z = forward_mlp(enc, x)?;
        let d = z.cols();
        let mut sums = vec![vec![0.0; d]; num_classes];
        for (r, &y) in batch.labels.iter().enumerate() {
            for (s, v) in sums[y].iter_mut().zip(z.row(r)) {
                *s += v;
            }
        }
        for (k, sum) in sums.into_iter().enumerate() {
            if counts[k] == 0 {
                continue;
            }
            let n = counts[k] as f64;
            out.push(Prototype {
                modality: m,
                class: k,
                vector: sum.into_iter().map(|s| s / n).collect(),
            });
        }
    }
    Ok(out)
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn normalize_prototype(p: &Prototype) -> Result<Prototype> {
    let norm = l2_norm(&p.vector);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector(format!(
            "prototype of modality {} class {} (dead encoder?)",
            p.modality + 1,
            p.class
        )));
    }
    Ok(Prototype {
        vector: p.vector.iter().map(|v| v / norm).collect(),
        ..p.clone()
    })
}

/// Averages each (modality, class) prototype over the clients that reported
/// it. The result is ordered by modality, then class.
pub fn global_prototypes(
    locals: &[Vec<Prototype>],
    num_modalities: usize,
    num_classes: usize,
) -> Result<Vec<Prototype>> {
    // running (sum, count) per modality and class
    type Acc = Option<(Vec<f64>, usize)>;
    let mut sums: Vec<Vec<Acc>> = vec![vec![None; num_classes]; num_modalities];
    for p in locals.iter().flatten() {
        if p.modality >= num_modalities || p.class >= num_classes {
            return Err(Error::invalid(format!(
                "prototype for modality {} class {} outside {num_modalities}×{num_classes}",
                p.modality + 1,
                p.class
            )));
        }
        match &mut sums[p.modality][p.class] {
            Some((acc, n)) => {
                if acc.len() != p.vector.len() {
                    return Err(Error::shape("global_prototypes", acc.len(), p.vector.len()));
                }
                acc.iter_mut().zip(&p.vector).for_each(|(a, v)| *a += v);
                *n += 1;
            }
            slot @ None => *slot = Some((p.vector.clone(), 1)),
        }
    }
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(num_modalities * num_classes);
    for (m, classes) in sums.into_iter().enumerate() {
        for (k, entry) in classes.into_iter().enumerate() {
            match entry {
                Some((acc, n)) => out.push(Prototype {
                    modality: m,
                    class: k,
                    vector: acc.into_iter().map(|a| a / n as f64).collect(),
                }),
                None => missing.push((m, k)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPrototypes(missing));
    }
    Ok(out)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine similarity of a zero prototype".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// `(1/K) Σ_{k≠o} cos(p_k, p_o)` over all ordered pairs of one modality's
/// class prototypes.
pub fn quality_index(prototypes: &[&[f64]]) -> Result<f64> {
    let k = prototypes.len();
    if k < 2 {
        return Err(Error::invalid(format!(
            "quality index needs at least 2 prototypes, got {k}"
        )));
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += cosine(prototypes[i], prototypes[j])?;
            }
        }
    }
    Ok(total / k as f64)
}

/// Raw quality index of every modality from a full set of global prototypes.
pub fn raw_quality(globals: &[Prototype], num_modalities: usize) -> Result<Vec<f64>> {
    (0..num_modalities)
        .map(|m| {
            let vs: Vec<&[f64]> = globals
                .iter()
                .filter(|p| p.modality == m)
                .map(|p| p.vector.as_slice())
                .collect();
            quality_index(&vs)
        })
        .collect()
}

/// Unit-L2 encoder quality vector with non-negative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVector(Vec<f64>);

impl QualityVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1/√M` in every entry.
    pub fn uniform(m: usize) -> Self {
        QualityVector(vec![1.0 / (m as f64).sqrt(); m])
    }
}

/// Clamps negative raw indices to zero, then scales to unit L2 norm.
pub fn normalize_quality(raw: &[f64]) -> Result<QualityVector> {
    Ok(QualityVector(clamp_and_normalize(raw, "quality")?))
}

pub(crate) fn clamp_and_normalize(raw: &[f64], what: &str) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Empty(format!("{what} vector")));
    }
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("{what} vector"),
            value: *v,
        });
    }
    let clamped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let norm = l2_norm(&clamped);
    if norm == 0.0 {
        return Err(Error::ZeroVector(format!(
            "{what} vector {raw:?} has no positive entry"
        )));
    }
    Ok(clamped.into_iter().map(|v| v / norm).collect())
}

pub(crate) fn sum_over(values: &[f64], combination: Combination) -> Result<f64> {
    if combination.is_empty() {
        return Err(Error::invalid("combination must be non-empty"));
    }
    if !combination.fits(values.len()) {
        return Err(Error::invalid(format!(
            "combination {combination} exceeds {} modalities",
            values.len()
        )));
    }
    Ok(combination.modalities().map(|m| values[m]).sum())
}

/// `Ωˢ = Σ_{m∈Cₛ} ωᵐ`.
pub fn combination_quality(q: &QualityVector, combination: Combination) -> Result<f64> {
    sum_over(&q.0, combination)
}
