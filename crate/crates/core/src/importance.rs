//! Exact Shapley valuation of modalities on the server validation set.
//!
//! The value of a coalition `S` is the header's cross-entropy when only the
//! features of modalities in `S` are fed and the rest are zero vectors. Since
//! adding informative modalities lowers the loss, raw Shapley values are
//! normally negative; importance is their negation, clamped at zero and
//! L2-normalized.

use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::fedsim::GlobalModel;
use crate::nn::cross_entropy;
use crate::prototype::{clamp_and_normalize, sum_over};
use crate::scheduler::Combination;

/// Exact enumeration guard.
pub const MAX_SHAPLEY_MODALITIES: usize = 12;

/// `v(S)` for every subset `S ⊆ {0..M}`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionCache {
    num_modalities: usize,
    values: Vec<f64>,
}

impl ValueFunctionCache {
    /// Evaluates `value` on all `2ᴹ` subsets, including the empty one.
    pub fn build(num_modalities: usize, mut value: impl FnMut(Combination) -> Result<f64>) -> Result<Self> {
        if num_modalities == 0 {
            return Err(Error::invalid("Shapley values need at least one modality"));
        }
        if num_modalities > MAX_SHAPLEY_MODALITIES {
            return Err(Error::TooManyModalities {
                got: num_modalities,
                max: MAX_SHAPLEY_MODALITIES,
            });
        }
        let values = (0..1u32 << num_modalities)
            .map(|mask| value(Combination::from_mask(mask)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ValueFunctionCache { num_modalities, values })
    }

    pub fn num_modalities(&self) -> usize {
        self.num_modalities
    }

    pub fn get(&self, subset: Combination) -> f64 {
        self.values[subset.index()]
    }

    pub fn entries(&self) -> impl Iterator<Item = (Combination, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(mask, &v)| (Combination::from_mask(mask as u32), v))
    }

    /// Subset-form Shapley value of every modality.
    pub fn shapley(&self) -> Vec<f64> {
        let m = self.num_modalities;
        let fact: Vec<f64> = (0..=m)
            .scan(1.0, |acc, i| {
                if i > 0 {
                    *acc *= i as f64;
                }
                Some(*acc)
            })
            .collect();
        (0..m)
            .map(|player| {
                let bit = 1u32 << player;
                (0..1u32 << m)
                    .filter(|s| s & bit == 0)
                    .map(|s| {
                        let size = s.count_ones() as usize;
                        let weight = fact[size] * fact[m - size - 1] / fact[m];
                        weight * (self.values[(s | bit) as usize] - self.values[s as usize])
                    })
                    .sum()
            })
            .collect()
    }

    /// `Σ raw γ − (v(full) − v(∅))`; zero for an exact Shapley vector.
    pub fn efficiency_residual(&self, raw: &[f64]) -> f64 {
        let full = Combination::full(self.num_modalities);
        raw.iter().sum::<f64>() - (self.get(full) - self.get(Combination::EMPTY))
    }
}

/// Mean validation cross-entropy with modalities outside `subset` zeroed at
/// the header input.
pub fn evaluate_subset_loss(model: &GlobalModel, validation: &Batch, subset: Combination) -> Result<f64> {
    let encoded = model.encode(&validation.features)?;
    let logits = model.head(&encoded, subset)?;
    cross_entropy(&logits, &validation.labels)?.item()
}

/// Fills the value cache for `model`, encoding the validation set once.
pub fn value_cache(model: &GlobalModel, validation: &Batch) -> Result<ValueFunctionCache> {
    let m = model.num_modalities();
    if m > MAX_SHAPLEY_MODALITIES {
        return Err(Error::TooManyModalities {
            got: m,
            max: MAX_SHAPLEY_MODALITIES,
        });
    }
    let encoded = model.encode(&validation.features)?;
    ValueFunctionCache::build(m, |subset| {
        let logits = model.head(&encoded, subset)?;
        cross_entropy(&logits, &validation.labels)?.item()
    })
}

/// Raw Shapley value of each modality.
pub fn shapley_values(model: &GlobalModel, validation: &Batch) -> Result<Vec<f64>> {
    Ok(value_cache(model, validation)?.shapley())
}

/// Unit-L2 importance vector with non-negative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(Vec<f64>);

impl ImportanceVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn uniform(m: usize) -> Self {
        ImportanceVector(vec![1.0 / (m as f64).sqrt(); m])
    }
}

/// Negates raw Shapley values (loss reduction), clamps at zero and scales to
/// unit L2 norm.
pub fn normalize_importance(raw: &[f64]) -> Result<ImportanceVector> {
    let negated: Vec<f64> = raw.iter().map(|v| -v).collect();
    Ok(ImportanceVector(clamp_and_normalize(&negated, "importance")?))
}

/// `Γˢ = Σ_{m∈Cₛ} γᵐ`.
pub fn combination_importance(iv: &ImportanceVector, combination: Combination) -> Result<f64> {
    sum_over(&iv.0, combination)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_player_gets_full_marginal() {
        let cache = ValueFunctionCache::build(1, |s| Ok(if s.is_empty() { 2.0 } else { 0.5 })).unwrap();
        assert_eq!(cache.shapley(), vec![-1.5]);
    }

    #[test]
    fn guard_rejects_large_m() {
        assert!(matches!(
            ValueFunctionCache::build(13, |_| Ok(0.0)),
            Err(Error::TooManyModalities { got: 13, max: 12 })
        ));
        assert!(ValueFunctionCache::build(0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn dummy_player_gets_zero() {
        // v depends only on modality 0
        let cache = ValueFunctionCache::build(3, |s| Ok(if s.contains(0) { 1.0 } else { 3.0 })).unwrap();
        let g = cache.shapley();
        assert!((g[0] + 2.0).abs() < 1e-12);
        assert!(g[1].abs() < 1e-12 && g[2].abs() < 1e-12);
    }

    #[test]
    fn importance_normalization() {
        assert_eq!(normalize_importance(&[-3.0, -4.0]).unwrap().values(), &[0.6, 0.8]);
        assert_eq!(normalize_importance(&[-5.0, 1.0]).unwrap().values(), &[1.0, 0.0]);
        assert!(normalize_importance(&[0.5, 1.0]).is_err());
    }

    #[test]
    fn combination_importance_is_additive() {
        let iv = normalize_importance(&[-1.0, -2.0, -2.0]).unwrap();
        let a = Combination::single(0);
        let b = Combination::from_modalities(&[1, 2]);
        let whole = combination_importance(&iv, a.union(b)).unwrap();
        let parts = combination_importance(&iv, a).unwrap() + combination_importance(&iv, b).unwrap();
        assert!((whole - parts).abs() < 1e-15);
        assert!(combination_importance(&iv, Combination::EMPTY).is_err());
    }
}
