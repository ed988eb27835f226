use flexmod::rng::seeded;
use flexmod::scheduler::{
    divergence_bound_sizes, order_schedule, solve_allocation, time_cost, utility, AllocationVector, BoundParams,
    Combination, CombinationTable,
};
use proptest::prelude::*;
use rand::Rng;

/// Every feasible integer allocation, by depth-first enumeration.
fn exhaustive_best(table: &CombinationTable, beta: f64, budget: u32) -> f64 {
    fn go(
        table: &CombinationTable,
        beta: f64,
        remaining: u32,
        s: usize,
        current: &mut AllocationVector,
        best: &mut f64,
    ) {
        if s == table.num_combinations() {
            let u = utility(current, table, beta).unwrap();
            if u > *best {
                *best = u;
            }
            return;
        }
        let t = table.times()[s];
        let mut n = 0;
        loop {
            current.counts[s] = n;
            go(table, beta, remaining - n * t, s + 1, current, best);
            if (n + 1) * t > remaining {
                break;
            }
            n += 1;
        }
        current.counts[s] = 0;
    }
    let mut best = f64::NEG_INFINITY;
    let mut a = AllocationVector::zeros(table.num_combinations());
    go(table, beta, budget, 0, &mut a, &mut best);
    best
}

fn random_table(m: usize, rng: &mut impl Rng) -> CombinationTable {
    let s = (1 << m) - 1;
    let times = (0..s).map(|_| rng.random_range(1..=8)).collect();
    let mut t = CombinationTable::new(m, times).unwrap();
    let unit = |rng: &mut dyn FnMut() -> f64| {
        let v: Vec<f64> = (0..m).map(|_| rng()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut draw = || rng.random_range(0.01..1.0);
    let omega = unit(&mut draw);
    let gamma = unit(&mut draw);
    t.set_raw_indices(omega, gamma).unwrap();
    t
}

#[test]
fn uci_shaped_instance_matches_exhaustive_search() {
    let mut rng = seeded(2024);
    for _ in 0..50 {
        let mut t = CombinationTable::new(2, vec![4, 3, 5]).unwrap();
        let w: (f64, f64) = (rng.random(), rng.random());
        let g: (f64, f64) = (rng.random(), rng.random());
        t.set_raw_indices(vec![w.0, w.1], vec![g.0, g.1]).unwrap();
        let beta: f64 = rng.random();
        let a = solve_allocation(&t, beta, 24).unwrap();
        assert!(time_cost(&a, &t) <= 24);
        assert_eq!(utility(&a, &t, beta).unwrap(), exhaustive_best(&t, beta, 24));
    }
}

#[test]
fn beta_one_with_concentrated_quality_only_trains_that_modality() {
    let mut t = CombinationTable::new(2, vec![4, 3, 5]).unwrap();
    t.set_raw_indices(vec![1.0, 0.0], vec![0.6, 0.8]).unwrap();
    let a = solve_allocation(&t, 1.0, 24).unwrap();
    assert!(a.total_slots() > 0);
    assert!(a.support().all(|c| c.contains(0)), "{a:?}");
}

#[test]
fn descending_order_minimizes_bound_for_uci_example() {
    let p = BoundParams::new(0.05, 3.0, 2.0, 2).unwrap();
    let desc = divergence_bound_sizes(&[2, 1, 1], &p).unwrap();
    for perm in [[1, 2, 1], [1, 1, 2]] {
        assert!(desc <= divergence_bound_sizes(&perm, &p).unwrap());
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

#[test]
fn descending_order_attains_minimum_over_all_permutations() {
    let mut rng = seeded(77);
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let len = rng.random_range(1..=7);
        let sizes: Vec<usize> = (0..len).map(|_| rng.random_range(1..=m)).collect();
        let p = BoundParams::new(
            rng.random_range(0.001..0.5),
            rng.random_range(0.1..10.0),
            rng.random_range(0.1..5.0),
            m,
        )
        .unwrap();
        let mut desc = sizes.clone();
        desc.sort_unstable_by(|a, b| b.cmp(a));
        let desc_bound = divergence_bound_sizes(&desc, &p).unwrap();
        let min = permutations(&sizes)
            .iter()
            .map(|perm| divergence_bound_sizes(perm, &p).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(desc_bound <= min, "{sizes:?}: {desc_bound} > {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_is_optimal_and_feasible(seed in any::<u64>(), m in 1usize..=3, budget in 0u32..=30, beta in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let t = random_table(m, &mut rng);
        let a = solve_allocation(&t, beta, budget).unwrap();
        prop_assert!(time_cost(&a, &t) <= u64::from(budget));
        prop_assert_eq!(utility(&a, &t, beta).unwrap(), exhaustive_best(&t, beta, budget));
    }

    #[test]
    fn larger_budget_never_lowers_utility(seed in any::<u64>(), m in 1usize..=3, budget in 0u32..=29, beta in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let t = random_table(m, &mut rng);
        let u0 = utility(&solve_allocation(&t, beta, budget).unwrap(), &t, beta).unwrap();
        let u1 = utility(&solve_allocation(&t, beta, budget + 1).unwrap(), &t, beta).unwrap();
        prop_assert!(u1 >= u0);
    }

    #[test]
    fn schedule_preserves_counts_and_order(counts in prop::collection::vec(0u32..4, 7)) {
        let t = CombinationTable::new(3, vec![1; 7]).unwrap();
        let a = AllocationVector { counts, round: 0 };
        let s = order_schedule(&a, &t);
        prop_assert!(s.is_descending());
        prop_assert_eq!(s.len() as u32, a.total_slots());
        prop_assert_eq!(s.to_allocation(&t), a);
    }

    #[test]
    fn separate_singletons_equal_combined_slot(seed in any::<u64>(), m in 2usize..=4) {
        let mut rng = seeded(seed);
        let t = random_table(m, &mut rng);
        let mask: u32 = rng.random_range(1..(1u32 << m));
        let combo = Combination::from_mask(mask);
        for beta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mut separate = AllocationVector::zeros(t.num_combinations());
            for j in combo.modalities() {
                separate.set(Combination::single(j), 1);
            }
            let mut combined = AllocationVector::zeros(t.num_combinations());
            combined.set(combo, 1);
            prop_assert_eq!(utility(&separate, &t, beta).unwrap(), utility(&combined, &t, beta).unwrap());
        }
    }

    #[test]
    fn merging_disjoint_units_never_lowers_utility(seed in any::<u64>(), beta in 0.0f64..=1.0) {
        // t({1,2}) < t({1}) + t({2}) for the UCI-style table
        let mut rng = seeded(seed);
        let mut t = CombinationTable::new(2, vec![4, 3, 5]).unwrap();
        t.set_raw_indices(vec![rng.random(), rng.random()], vec![rng.random(), rng.random()]).unwrap();
        let separate = AllocationVector { counts: vec![1, 1, 0], round: 0 };
        let merged = AllocationVector { counts: vec![0, 0, 1], round: 0 };
        prop_assert!(utility(&merged, &t, beta).unwrap() >= utility(&separate, &t, beta).unwrap());
        prop_assert!(time_cost(&merged, &t) < time_cost(&separate, &t));
    }
}
