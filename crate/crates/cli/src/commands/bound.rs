use std::collections::BTreeSet;
use std::fmt::{self, Write};

use anyhow::Result;
use flexmod::scheduler::{divergence_bound_sizes, BoundParams};

use super::parse_list;
use crate::usage;

pub const MAX_ENUMERATED_SLOTS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub sizes: Vec<usize>,
    pub bound: f64,
    /// Every distinct ordering with its bound, smallest first.
    pub orders: Option<Vec<(Vec<usize>, f64)>>,
}

impl BoundReport {
    /// Whether the non-increasing ordering attains the smallest bound.
    pub fn descending_is_minimal(&self) -> Option<bool> {
        let orders = self.orders.as_ref()?;
        let min = orders.first()?.1;
        let mut desc = self.sizes.clone();
        desc.sort_unstable_by(|a, b| b.cmp(a));
        orders.iter().find(|(o, _)| *o == desc).map(|(_, b)| *b <= min)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "schedule: {}", join(&self.sizes))?;
        writeln!(f, "bound: {}", self.bound)?;
        if let Some(orders) = &self.orders {
            writeln!(f, "order,bound")?;
            for (o, b) in orders {
                writeln!(f, "{},{b}", join(o).replace(',', " "))?;
            }
            if let Some(ok) = self.descending_is_minimal() {
                writeln!(f, "descending order minimal: {}", if ok { "yes" } else { "no" })?;
            }
        }
        Ok(())
    }
}

fn join(sizes: &[usize]) -> String {
    sizes.iter().fold(String::new(), |mut s, c| {
        if !s.is_empty() {
            s.push(',');
        }
        let _ = write!(s, "{c}");
        s
    })
}

fn distinct_orders(sizes: &[usize]) -> BTreeSet<Vec<usize>> {
    fn go(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        if rest.is_empty() {
            out.insert(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            cur.push(x);
            go(rest, cur, out);
            cur.pop();
            rest.insert(i, x);
        }
    }
    let mut out = BTreeSet::new();
    go(&mut sizes.to_vec(), &mut Vec::new(), &mut out);
    out
}

pub fn run(
    schedule: &str,
    eta: f64,
    lipschitz: f64,
    delta: f64,
    modalities: usize,
    all_orders: bool,
) -> Result<BoundReport> {
    let sizes: Vec<usize> = parse_list(schedule, "schedule")?;
    let params = BoundParams::new(eta, lipschitz, delta, modalities).map_err(|e| usage(e.to_string()))?;
    let bound = divergence_bound_sizes(&sizes, &params).map_err(|e| usage(e.to_string()))?;
    let orders = if all_orders {
        if sizes.len() > MAX_ENUMERATED_SLOTS {
            return Err(usage(format!(
                "--all-orders supports at most {MAX_ENUMERATED_SLOTS} slots, got {}",
                sizes.len()
            )));
        }
        let mut rows = distinct_orders(&sizes)
            .into_iter()
            .map(|o| divergence_bound_sizes(&o, &params).map(|b| (o, b)))
            .collect::<flexmod::Result<Vec<_>>>()?;
        rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        Some(rows)
    } else {
        None
    };
    Ok(BoundReport { sizes, bound, orders })
}
