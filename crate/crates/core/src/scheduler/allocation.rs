use serde::{Deserialize, Serialize};

use super::combination::Combination;
use super::table::CombinationTable;
use crate::error::{Error, Result};

/// Slot counts `a_s` per combination, stored at position `s − 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationVector {
    pub counts: Vec<u32>,
    pub round: usize,
}

impl AllocationVector {
    pub fn zeros(num_combinations: usize) -> Self {
        AllocationVector {
            counts: vec![0; num_combinations],
            round: 0,
        }
    }

    pub fn count(&self, c: Combination) -> u32 {
        self.counts[c.index() - 1]
    }

    pub fn set(&mut self, c: Combination, n: u32) {
        self.counts[c.index() - 1] = n;
    }

    pub fn total_slots(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// How many slots train each modality.
    pub fn modality_counts(&self, num_modalities: usize) -> Vec<u64> {
        let mut n = vec![0u64; num_modalities];
        for (i, &a) in self.counts.iter().enumerate() {
            for m in Combination::from_mask(i as u32 + 1).modalities() {
                n[m] += u64::from(a);
            }
        }
        n
    }

    pub fn support(&self) -> impl Iterator<Item = Combination> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, _)| Combination::from_mask(i as u32 + 1))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

fn check_len(a: &AllocationVector, table: &CombinationTable) -> Result<()> {
    if a.counts.len() != table.num_combinations() {
        return Err(Error::shape("allocation", table.num_combinations(), a.counts.len()));
    }
    Ok(())
}

/// Utility of modality slot counts under per-modality utilities `u`.
fn utility_of_counts(u: &[f64], counts: &[u64]) -> f64 {
    u.iter().zip(counts).map(|(u, &n)| u * n as f64).sum()
}

/// `U = Σ_s (β·Ωˢ + (1−β)·Γˢ)·a_s`.
///
/// Evaluated as `Σ_m (β·ωᵐ + (1−β)·γᵐ)·n_m` with `n_m` the number of slots
/// that train modality `m`, so allocations training the same modalities the
/// same number of times score bit-identically.
pub fn utility(a: &AllocationVector, table: &CombinationTable, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_len(a, table)?;
    let u = table.modality_utility(beta);
    Ok(utility_of_counts(&u, &a.modality_counts(table.num_modalities())))
}

/// `Σ_s t_s·a_s`.
pub fn time_cost(a: &AllocationVector, table: &CombinationTable) -> u64 {
    a.counts
        .iter()
        .zip(table.times())
        .map(|(&n, &t)| u64::from(n) * u64::from(t))
        .sum()
}

/// Maximizes [`utility`] subject to `time_cost ≤ budget` over non-negative
/// integer allocations, by unbounded-knapsack DP over budgets `0..=budget`.
///
/// At each budget the incumbent is the best allocation for one unit less
/// (the unit stays idle); items are tried in order of decreasing combination
/// size, then increasing index, and replace the incumbent only on a strict
/// improvement. Zero-utility slots are therefore never scheduled and, among
/// equal-utility packings, larger combinations win.
pub fn solve_allocation(table: &CombinationTable, beta: f64, budget: u32) -> Result<AllocationVector> {
    check_beta(beta)?;
    let m = table.num_modalities();
    let u = table.modality_utility(beta);
    let mut items: Vec<Combination> = table.combinations().collect();
    items.sort_by_key(|c| (std::cmp::Reverse(c.len()), c.index()));

    let b_max = budget as usize;
    let mut best_alloc: Vec<Vec<u32>> = Vec::with_capacity(b_max + 1);
    let mut best_counts: Vec<Vec<u64>> = Vec::with_capacity(b_max + 1);
    let mut best_value: Vec<f64> = Vec::with_capacity(b_max + 1);
    best_alloc.push(vec![0; table.num_combinations()]);
    best_counts.push(vec![0; m]);
    best_value.push(0.0);

    for b in 1..=b_max {
        let mut pick: Option<(usize, Combination)> = None;
        let mut value = best_value[b - 1];
        for &c in &items {
            let t = table.time(c) as usize;
            if t > b {
                continue;
            }
            let mut counts = best_counts[b - t].clone();
            for j in c.modalities() {
                counts[j] += 1;
            }
            let v = utility_of_counts(&u, &counts);
            if v > value {
                value = v;
                pick = Some((b - t, c));
            }
        }
        match pick {
            None => {
                best_alloc.push(best_alloc[b - 1].clone());
                best_counts.push(best_counts[b - 1].clone());
            }
            Some((from, c)) => {
                let mut alloc = best_alloc[from].clone();
                alloc[c.index() - 1] += 1;
                let mut counts = best_counts[from].clone();
                for j in c.modalities() {
                    counts[j] += 1;
                }
                best_alloc.push(alloc);
                best_counts.push(counts);
            }
        }
        best_value.push(value);
    }

    Ok(AllocationVector {
        counts: best_alloc.pop().expect("budget 0 entry always present"),
        round: 0,
    })
}

/// Allocation that fills the budget with as many slots of `c` as fit.
pub fn fill_with(table: &CombinationTable, c: Combination, budget: u32) -> AllocationVector {
    let mut a = AllocationVector::zeros(table.num_combinations());
    a.set(c, budget / table.time(c));
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uci_table() -> CombinationTable {
        CombinationTable::new(2, vec![4, 3, 5]).unwrap()
    }

    #[test]
    fn time_cost_of_uci_table() {
        let t = uci_table();
        let a = AllocationVector {
            counts: vec![1, 1, 1],
            round: 0,
        };
        assert_eq!(time_cost(&a, &t), 12);
        assert_eq!(time_cost(&AllocationVector::zeros(3), &t), 0);
    }

    #[test]
    fn utility_extremes_of_beta() {
        let mut t = uci_table();
        t.set_raw_indices(vec![0.6, 0.8], vec![1.0, 0.0]).unwrap();
        let a = AllocationVector {
            counts: vec![2, 1, 1],
            round: 0,
        };
        // Ω: {1}=0.6, {2}=0.8, {1,2}=1.4; Γ: 1, 0, 1
        assert!((utility(&a, &t, 1.0).unwrap() - (1.2 + 0.8 + 1.4)).abs() < 1e-12);
        assert!((utility(&a, &t, 0.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(utility(&a, &t, 1.5).is_err());
        assert!(utility(&a, &t, -0.1).is_err());
    }

    #[test]
    fn zero_budget_gives_zero_allocation() {
        let a = solve_allocation(&uci_table(), 0.5, 0).unwrap();
        assert_eq!(a.counts, vec![0, 0, 0]);
    }

    #[test]
    fn single_item_fills_floor_of_budget() {
        let t = CombinationTable::new(1, vec![5]).unwrap();
        let a = solve_allocation(&t, 0.3, 24).unwrap();
        assert_eq!(a.counts, vec![4]);
    }

    #[test]
    fn combined_slot_preferred_on_ties() {
        // t({1}) + t({2}) > t({1,2}): with equal utility the combined slot wins.
        let t = CombinationTable::new(2, vec![2, 2, 3]).unwrap();
        let a = solve_allocation(&t, 0.5, 4).unwrap();
        assert_eq!(a.counts, vec![0, 0, 1]);
    }
}
