use serde::{Deserialize, Serialize};

use super::allocation::AllocationVector;
use super::combination::Combination;
use super::table::CombinationTable;

/// Ordered training slots for one local period.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub slots: Vec<Combination>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.slots.iter().map(|c| c.len()).collect()
    }

    pub fn time(&self, table: &CombinationTable) -> u64 {
        self.slots.iter().map(|&c| u64::from(table.time(c))).sum()
    }

    /// Slot counts per combination.
    pub fn to_allocation(&self, table: &CombinationTable) -> AllocationVector {
        let mut a = AllocationVector::zeros(table.num_combinations());
        for &c in &self.slots {
            a.counts[c.index() - 1] += 1;
        }
        a
    }

    pub fn is_descending(&self) -> bool {
        self.slots.windows(2).all(|w| w[0].len() >= w[1].len())
    }
}

/// Expands `a` into slots ordered by decreasing combination size, ties by
/// increasing combination index.
pub fn order_schedule(a: &AllocationVector, table: &CombinationTable) -> Schedule {
    let mut combos: Vec<Combination> = table.combinations().collect();
    combos.sort_by_key(|c| (std::cmp::Reverse(c.len()), c.index()));
    let slots = combos
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c, a.counts.get(c.index() - 1).copied().unwrap_or(0) as usize))
        .collect();
    Schedule { slots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn larger_combinations_first() {
        let t = CombinationTable::new(2, vec![4, 3, 5]).unwrap();
        let a = AllocationVector {
            counts: vec![2, 0, 1],
            round: 0,
        };
        let s = order_schedule(&a, &t);
        let full = Combination::full(2);
        let acc = Combination::single(0);
        assert_eq!(s.slots, vec![full, acc, acc]);
        assert_eq!(s.to_allocation(&t), a);
    }

    #[test]
    fn single_combination_is_constant() {
        let t = CombinationTable::new(2, vec![4, 3, 5]).unwrap();
        let a = AllocationVector {
            counts: vec![0, 3, 0],
            round: 0,
        };
        let s = order_schedule(&a, &t);
        assert_eq!(s.slots, vec![Combination::single(1); 3]);
    }
}
