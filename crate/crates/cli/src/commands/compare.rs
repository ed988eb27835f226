use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use flexmod::fedsim::{run_experiment, ExperimentResult, StrategyKind};
use rayon::prelude::*;

use super::{load_config, parse_list};
use crate::usage;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStats {
    pub strategy: StrategyKind,
    /// `None` when fewer than half of the seeds reached the target.
    pub median_rounds_to_target: Option<f64>,
    pub median_final_acc: f64,
    pub reached: usize,
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub out_dir: PathBuf,
    pub stats: Vec<StrategyStats>,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>22} {:>16} {:>8}",
            "strategy", "median rounds-to-target", "median final acc", "reached"
        )?;
        for s in &self.stats {
            let rtt = s.median_rounds_to_target.map_or("-".to_string(), |r| r.to_string());
            writeln!(
                f,
                "{:<20} {:>22} {:>16.4} {:>5}/{}",
                s.strategy.to_string(),
                rtt,
                s.median_final_acc,
                s.reached,
                s.runs
            )?;
        }
        writeln!(f, "wrote {}", self.out_dir.join("compare.csv").display())
    }
}

/// Median with the two middle values averaged; infinities propagate.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn stats(strategy: StrategyKind, runs: &[&ExperimentResult]) -> StrategyStats {
    let rtt: Vec<f64> = runs
        .iter()
        .map(|r| r.rounds_to_target().map_or(f64::INFINITY, |x| x as f64))
        .collect();
    let finals: Vec<f64> = runs.iter().map(|r| r.final_accuracy()).collect();
    let m = median(&rtt);
    StrategyStats {
        strategy,
        median_rounds_to_target: m.is_finite().then_some(m),
        median_final_acc: median(&finals),
        reached: rtt.iter().filter(|r| r.is_finite()).count(),
        runs: runs.len(),
    }
}

/// Runs every (strategy, seed) cell. Cells are independent and run on the
/// rayon pool; rows are written in strategy-then-seed order.
pub fn run(config_path: &Path, strategies: &str, seeds: &str, out: Option<&Path>) -> Result<CompareReport> {
    let base = load_config(config_path)?;
    let strategies: Vec<StrategyKind> = strategies
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<StrategyKind>())
        .collect::<flexmod::Result<_>>()?;
    if strategies.is_empty() {
        return Err(usage("at least one strategy is required"));
    }
    for s in &strategies {
        s.validate(base.num_modalities())?;
    }
    let seeds: Vec<u64> = parse_list(seeds, "seed")?;
    if seeds.is_empty() {
        return Err(usage("at least one seed is required"));
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| base.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let cells: Vec<(StrategyKind, u64)> = strategies
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<ExperimentResult> = cells
        .par_iter()
        .map(|&(strategy, seed)| {
            let mut cfg = base.clone();
            cfg.schedule.strategy = strategy;
            cfg.run.seed = seed;
            run_experiment(&cfg)
        })
        .collect::<flexmod::Result<_>>()?;

    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
    w.write_record(["strategy", "seed", "round", "accuracy", "loss"])?;
    for ((strategy, seed), res) in cells.iter().zip(&results) {
        for r in &res.records {
            w.write_record([
                strategy.to_string(),
                seed.to_string(),
                r.round.to_string(),
                r.accuracy.to_string(),
                r.loss.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let stats: Vec<StrategyStats> = strategies
        .iter()
        .map(|&s| {
            let runs: Vec<&ExperimentResult> = cells
                .iter()
                .zip(&results)
                .filter(|((cs, _), _)| *cs == s)
                .map(|(_, r)| r)
                .collect();
            stats(s, &runs)
        })
        .collect();
    let mut w = csv::Writer::from_path(dir.join("medians.csv"))?;
    w.write_record([
        "strategy",
        "median_rounds_to_target",
        "median_final_acc",
        "reached",
        "runs",
    ])?;
    for s in &stats {
        w.write_record([
            s.strategy.to_string(),
            s.median_rounds_to_target.map(|r| r.to_string()).unwrap_or_default(),
            s.median_final_acc.to_string(),
            s.reached.to_string(),
            s.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(CompareReport { out_dir: dir, stats })
}
