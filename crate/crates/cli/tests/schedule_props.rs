use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;

fn reference() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_the_allocation_in_descending_size(
        beta in 0.0f64..=1.0,
        omega in prop::collection::vec(0.0f64..1.0, 2),
        gamma in prop::collection::vec(0.0f64..1.0, 2),
        budget in 0u32..40,
    ) {
        let r = flexmod_cli::schedule::run(&reference(), beta, &list(&omega), &list(&gamma), Some(budget)).unwrap();
        let mut counted: BTreeMap<String, u32> = BTreeMap::new();
        for s in &r.schedule {
            *counted.entry(s.clone()).or_default() += 1;
        }
        for (label, n) in &r.allocation {
            prop_assert_eq!(counted.get(label).copied().unwrap_or(0), *n);
        }
        let sizes: Vec<usize> = r.schedule.iter().map(|s| s.split(',').count()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.budget_used <= u64::from(budget));
        prop_assert_eq!(r.budget_used + r.idle, u64::from(budget));
    }
}
