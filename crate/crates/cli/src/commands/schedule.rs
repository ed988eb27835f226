use std::path::Path;

use anyhow::Result;
use flexmod::scheduler::{order_schedule, solve_allocation, time_cost, utility};
use serde::Serialize;

use super::{load_config, parse_list};
use crate::usage;

#[derive(Debug, Serialize)]
pub struct ScheduleReport {
    pub beta: f64,
    pub budget: u32,
    /// Slot count per combination, keyed by member list.
    pub allocation: Vec<(String, u32)>,
    /// Combinations in training order.
    pub schedule: Vec<String>,
    pub utility: f64,
    pub budget_used: u64,
    pub idle: u64,
}

pub fn run(config_path: &Path, beta: f64, omega: &str, gamma: &str, budget: Option<u32>) -> Result<ScheduleReport> {
    let config = load_config(config_path)?;
    let m = config.num_modalities();
    let omega: Vec<f64> = parse_list(omega, "omega")?;
    let gamma: Vec<f64> = parse_list(gamma, "gamma")?;
    if omega.len() != m || gamma.len() != m {
        return Err(usage(format!(
            "omega has {} and gamma {} entries; the config has {m} modalities",
            omega.len(),
            gamma.len()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(usage(format!("beta {beta} outside [0, 1]")));
    }
    let budget = budget.unwrap_or(config.schedule.budget);
    let mut table = config.schedule.table(m)?;
    table.set_raw_indices(omega, gamma).map_err(|e| usage(e.to_string()))?;
    let a = solve_allocation(&table, beta, budget)?;
    let schedule = order_schedule(&a, &table);
    let used = time_cost(&a, &table);
    Ok(ScheduleReport {
        beta,
        budget,
        allocation: table.combinations().map(|c| (c.label(), a.count(c))).collect(),
        schedule: schedule.slots.iter().map(|c| c.label()).collect(),
        utility: utility(&a, &table, beta)?,
        budget_used: used,
        idle: u64::from(budget) - used,
    })
}
