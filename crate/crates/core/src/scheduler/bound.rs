use serde::{Deserialize, Serialize};

use super::order::Schedule;
use crate::error::{Error, Result};

/// Constants of the partial-update divergence bound: step size `η`,
/// gradient Lipschitz constant `L`, per-modality gradient-norm bound `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub eta: f64,
    pub lipschitz: f64,
    pub delta: f64,
    pub num_modalities: usize,
}

impl BoundParams {
    pub fn new(eta: f64, lipschitz: f64, delta: f64, num_modalities: usize) -> Result<Self> {
        for (name, v) in [("eta", eta), ("L", lipschitz), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if num_modalities == 0 {
            return Err(Error::invalid("M must be positive"));
        }
        Ok(BoundParams {
            eta,
            lipschitz,
            delta,
            num_modalities,
        })
    }
}

/// Upper bound on the squared distance after one local period between the
/// model trained with `schedule` and one that updates every modality each
/// slot. Unrolling the per-slot recursion
/// `D_e ≤ (2 + 2η²L²|C_e|)·D_{e−1} + 2η²(M − |C_e|)δ²` gives
///
/// `2η² Σ_e [Π_{j=e+1}^{E} (2 + 2η²L²|C_j|)] (M − |C_e|) δ²`
///
/// where the empty product (last slot) is 1. Under this form, training the
/// slots in non-increasing combination size minimizes the bound.
pub fn divergence_bound_sizes(sizes: &[usize], params: &BoundParams) -> Result<f64> {
    let m = params.num_modalities;
    if let Some(&bad) = sizes.iter().find(|&&c| c == 0 || c > m) {
        return Err(Error::invalid(format!("combination size {bad} outside 1..={m}")));
    }
    if sizes.is_empty() {
        return Ok(0.0);
    }
    let eta2 = params.eta * params.eta;
    let l2 = params.lipschitz * params.lipschitz;
    let factor = |c: usize| 2.0 + 2.0 * eta2 * l2 * c as f64;
    let mut total = 0.0;
    // Π over the slots after the current one.
    let mut suffix = 1.0;
    for &c in sizes.iter().rev() {
        total += suffix * (m - c) as f64;
        suffix *= factor(c);
    }
    Ok(2.0 * eta2 * total * params.delta * params.delta)
}

pub fn divergence_bound(schedule: &Schedule, params: &BoundParams) -> Result<f64> {
    divergence_bound_sizes(&schedule.cardinalities(), params)
}

/// Running record of observed per-modality gradient norms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientTrace {
    norms: Vec<f64>,
    max: f64,
}

impl GradientTrace {
    pub fn push(&mut self, norm: f64) {
        if norm.is_finite() {
            self.norms.push(norm);
            self.max = self.max.max(norm);
        }
    }

    pub fn extend(&mut self, other: &GradientTrace) {
        for &n in &other.norms {
            self.push(n);
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        (!self.norms.is_empty()).then_some(self.max)
    }
}

/// `δ` is the largest norm seen so far; `η` and `L` come from configuration.
pub fn estimate_bound_params(
    trace: &GradientTrace,
    eta: f64,
    lipschitz: f64,
    num_modalities: usize,
) -> Result<BoundParams> {
    let delta = trace
        .max()
        .ok_or_else(|| Error::Empty("gradient trace has no entries".into()))?;
    BoundParams::new(eta, lipschitz, delta.max(f64::MIN_POSITIVE), num_modalities)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BoundParams {
        BoundParams::new(0.1, 2.0, 1.5, 3).unwrap()
    }

    #[test]
    fn full_combination_everywhere_gives_zero() {
        assert_eq!(divergence_bound_sizes(&[3, 3, 3], &params()).unwrap(), 0.0);
    }

    #[test]
    fn single_slot_closed_form() {
        let p = params();
        let b = divergence_bound_sizes(&[1], &p).unwrap();
        let expected = 2.0 * 0.01 * 2.0 * 1.5 * 1.5;
        assert!((b - expected).abs() < 1e-15);
    }

    #[test]
    fn two_slot_expansion() {
        let p = params();
        // e=1: factor(c2)·(M−c1); e=2: (M−c2)
        let f = |c: f64| 2.0 + 2.0 * 0.01 * 4.0 * c;
        let expected = 2.0 * 0.01 * (f(1.0) * 1.0 + 2.0) * 2.25;
        let b = divergence_bound_sizes(&[2, 1], &p).unwrap();
        assert!((b - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(divergence_bound_sizes(&[4], &params()).is_err());
        assert!(divergence_bound_sizes(&[0], &params()).is_err());
    }

    #[test]
    fn trace_running_max() {
        let mut t = GradientTrace::default();
        assert!(estimate_bound_params(&t, 0.1, 1.0, 2).is_err());
        t.push(1.0);
        assert_eq!(estimate_bound_params(&t, 0.1, 1.0, 2).unwrap().delta, 1.0);
        t.push(3.0);
        t.push(2.0);
        assert_eq!(estimate_bound_params(&t, 0.1, 1.0, 2).unwrap().delta, 3.0);
    }
}
