//! `bench`: compares strategies on the synthetic benchmark across seeds.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use stepsearch_core::history::NoopObserver;
use stepsearch_core::parallel::Executor;

use crate::config::RunConfig;
use crate::search::{apply_budget, full_epochs, run_ecco, run_grm, run_timfbo, synthetic_benchmark, Strategy};

pub struct BenchArgs {
    pub config: PathBuf,
    pub strategies: Vec<Strategy>,
    pub seeds: u64,
    pub first_seed: u64,
    pub budget: Option<f64>,
    pub workers: usize,
}

struct Row {
    strategy: Strategy,
    true_perf: Vec<f64>,
    cost: Vec<f64>,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// Epoch cost recorded in a run summary.
fn summary_cost(strategy: Strategy, summary: &serde_json::Value) -> f64 {
    let f = |k: &str| summary.get(k).and_then(serde_json::Value::as_f64).unwrap_or(0.0);
    match strategy {
        Strategy::Grm => f("phase1_cost") + f("phase2_cost"),
        Strategy::Timfbo | Strategy::Ecco => f("cost"),
    }
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let base = RunConfig::load(&a.config)?;
    let space = base.resolve_space()?.ok_or_else(|| anyhow!("the configuration names no search space"))?;
    let exec = Executor::new(a.workers);
    let mut rows = Vec::new();
    for &strategy in &a.strategies {
        let mut cfg = base.clone();
        if a.budget.is_some() {
            cfg.budget = a.budget;
        }
        cfg.validate()?;
        apply_budget(&mut cfg, strategy)?;
        let bench = synthetic_benchmark(&cfg, &space, full_epochs(&cfg, strategy))?;
        let mut row = Row { strategy, true_perf: Vec::new(), cost: Vec::new() };
        for seed in a.first_seed..a.first_seed + a.seeds {
            let obs = &mut NoopObserver;
            let (best, summary) = match strategy {
                Strategy::Grm => run_grm(&space, &bench, &cfg, seed, None, &exec, obs)?,
                Strategy::Timfbo => run_timfbo(&space, &bench, &cfg, seed, None, &exec, obs)?,
                Strategy::Ecco => run_ecco(&space, &bench, &cfg, seed, None, &exec, obs)?,
            };
            row.true_perf.push(bench.true_performance(&best.class, &best.config)?);
            row.cost.push(summary_cost(strategy, &summary));
        }
        rows.push(row);
    }

    println!("{:<8} {:>6} {:>12} {:>10} {:>10} {:>12}", "strategy", "seeds", "true perf", "sd", "worst", "epochs");
    for r in &rows {
        let (m, sd) = mean_sd(&r.true_perf);
        let worst = r.true_perf.iter().copied().fold(f64::INFINITY, f64::min);
        let (cost, _) = mean_sd(&r.cost);
        println!(
            "{:<8} {:>6} {:>12.4} {:>10.4} {:>10.4} {:>12.1}",
            r.strategy.name(),
            r.true_perf.len(),
            m,
            sd,
            worst,
            cost
        );
    }
    Ok(())
}
