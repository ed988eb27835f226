use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::combination::{Combination, MAX_MODALITIES};
use crate::error::{Error, Result};
use crate::importance::ImportanceVector;
use crate::prototype::QualityVector;

/// Unit training time and per-modality indices for every non-empty modality
/// combination. Combination indices `Ωˢ`/`Γˢ` are sums over members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationTable {
    num_modalities: usize,
    /// `t_s`, stored at position `s − 1`.
    times: Vec<u32>,
    omega: Vec<f64>,
    gamma: Vec<f64>,
}

impl CombinationTable {
    /// `times[s − 1]` is the unit time of combination `s`. Indices start
    /// uniform.
    pub fn new(num_modalities: usize, times: Vec<u32>) -> Result<Self> {
        if num_modalities == 0 || num_modalities > MAX_MODALITIES {
            return Err(Error::invalid(format!(
                "modality count must lie in 1..={MAX_MODALITIES}, got {num_modalities}"
            )));
        }
        let s = (1usize << num_modalities) - 1;
        if times.len() != s {
            return Err(Error::invalid(format!(
                "{} unit times for {s} combinations",
                times.len()
            )));
        }
        if let Some(pos) = times.iter().position(|&t| t == 0) {
            return Err(Error::invalid(format!(
                "unit time of combination {} must be at least 1",
                Combination::from_mask(pos as u32 + 1)
            )));
        }
        Ok(CombinationTable {
            num_modalities,
            times,
            omega: QualityVector::uniform(num_modalities).values().to_vec(),
            gamma: ImportanceVector::uniform(num_modalities).values().to_vec(),
        })
    }

    /// Builds the table from a per-combination map; every combination must be
    /// present.
    pub fn from_time_map(num_modalities: usize, times: &BTreeMap<Combination, u32>) -> Result<Self> {
        if num_modalities == 0 || num_modalities > MAX_MODALITIES {
            return Err(Error::invalid(format!(
                "modality count must lie in 1..={MAX_MODALITIES}, got {num_modalities}"
            )));
        }
        if let Some(extra) = times.keys().find(|c| !c.fits(num_modalities) || c.is_empty()) {
            return Err(Error::invalid(format!(
                "unit time given for combination {extra} outside {num_modalities} modalities"
            )));
        }
        let list = Combination::all(num_modalities)
            .map(|c| {
                times
                    .get(&c)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("missing unit time for combination {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        CombinationTable::new(num_modalities, list)
    }

    pub fn with_indices(mut self, quality: &QualityVector, importance: &ImportanceVector) -> Result<Self> {
        self.set_raw_indices(quality.values().to_vec(), importance.values().to_vec())?;
        Ok(self)
    }

    /// Installs arbitrary non-negative per-modality indices.
    pub fn set_raw_indices(&mut self, omega: Vec<f64>, gamma: Vec<f64>) -> Result<()> {
        for (name, v) in [("quality", &omega), ("importance", &gamma)] {
            if v.len() != self.num_modalities {
                return Err(Error::invalid(format!(
                    "{name} vector has {} entries for {} modalities",
                    v.len(),
                    self.num_modalities
                )));
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::invalid(format!(
                    "{name} entry {x} must be finite and non-negative"
                )));
            }
        }
        self.omega = omega;
        self.gamma = gamma;
        Ok(())
    }

    pub fn num_modalities(&self) -> usize {
        self.num_modalities
    }

    pub fn num_combinations(&self) -> usize {
        self.times.len()
    }

    pub fn combinations(&self) -> impl Iterator<Item = Combination> {
        Combination::all(self.num_modalities)
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }

    pub fn time(&self, c: Combination) -> u32 {
        self.times[c.index() - 1]
    }

    pub fn modality_quality(&self) -> &[f64] {
        &self.omega
    }

    pub fn modality_importance(&self) -> &[f64] {
        &self.gamma
    }

    /// `Ωˢ`.
    pub fn quality(&self, c: Combination) -> f64 {
        c.modalities().map(|m| self.omega[m]).sum()
    }

    /// `Γˢ`.
    pub fn importance(&self, c: Combination) -> f64 {
        c.modalities().map(|m| self.gamma[m]).sum()
    }

    /// `β·ωᵐ + (1−β)·γᵐ` for each modality.
    pub fn modality_utility(&self, beta: f64) -> Vec<f64> {
        self.omega
            .iter()
            .zip(&self.gamma)
            .map(|(w, g)| beta * w + (1.0 - beta) * g)
            .collect()
    }

    /// Pairs of disjoint combinations whose union costs more than training them
    /// separately.
    pub fn subadditivity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in self.combinations() {
            for b in self.combinations() {
                if a < b && a.is_disjoint(b) {
                    let u = a.union(b);
                    let (ta, tb, tu) = (self.time(a), self.time(b), self.time(u));
                    if tu > ta + tb {
                        out.push(format!(
                            "combination {u} costs {tu} > {ta} + {tb} for {a} and {b} trained separately"
                        ));
                    }
                }
            }
        }
        out
    }
}
