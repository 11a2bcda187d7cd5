//! `search`: runs one strategy and persists its artifacts.
//!
//! A run directory holds:
//!
//! - `manifest.json`: what was run (strategy, seed, trainer, resolved config);
//! - `history.jsonl`: one record per trial or episode;
//! - `state.json`: the latest checkpoint and how many history records it covers;
//! - `best_config.json`: the chosen configuration;
//! - `summary.json`: costs and counts.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stepsearch_core::curriculum::CurriculumSchedule;
use stepsearch_core::ecco::{ecco_search, EccoEvent, EccoState, GenerationSummary};
use stepsearch_core::grm::{grm_search, GrmEvent, GrmState};
use stepsearch_core::history::{read_json, write_json_atomic, HistoryWriter, SearchObserver};
use stepsearch_core::parallel::Executor;
use stepsearch_core::space::{discretize_capped, ArchitectureClass, Configuration, SearchSpace};
use stepsearch_core::timfbo::{timfbo_search, ProxyDataset, TimfboState, TimfboTrial};
use stepsearch_core::trainer::{ProcessTrainer, SyntheticBenchmark, Trainer};

use crate::config::{BenchmarkKind, RunConfig, SpaceSource};

/// Full-fidelity trials granted to TI-MFBO when no budget is given.
pub(crate) const DEFAULT_TIMFBO_BUDGET: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Grm,
    Timfbo,
    Ecco,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Grm => "grm",
            Strategy::Timfbo => "timfbo",
            Strategy::Ecco => "ecco",
        }
    }
}

pub struct SearchArgs {
    pub strategy: Strategy,
    pub config: PathBuf,
    pub seed: u64,
    pub budget: Option<f64>,
    pub output: PathBuf,
    pub run_id: Option<String>,
    pub benchmark: String,
    pub trainer_cmd: Option<String>,
    pub workers: usize,
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    run_id: String,
    strategy: Strategy,
    space: String,
    trainer: String,
    seed: u64,
    budget: Option<f64>,
    output: String,
    config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct BestConfig {
    pub strategy: Strategy,
    pub class: ArchitectureClass,
    pub config: Configuration,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    action: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curriculum: Option<CurriculumSchedule>,
    /// The score is a surrogate prediction, not a measured result.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    predicted: bool,
}

/// Checkpoint plus the number of history records it accounts for, so a
/// resumed run can drop records written after the checkpoint.
#[derive(Serialize, Deserialize)]
struct Checkpoint<S> {
    events: u64,
    state: S,
}

struct Recorder {
    history: HistoryWriter,
    state_path: PathBuf,
    events: u64,
}

impl<E: Serialize, S: Serialize> SearchObserver<E, S> for Recorder {
    fn event(&mut self, event: &E) -> io::Result<()> {
        self.history.write(event)?;
        self.events += 1;
        Ok(())
    }

    fn checkpoint(&mut self, state: &S) -> io::Result<()> {
        write_json_atomic(&self.state_path, &Checkpoint { events: self.events, state })
    }
}

/// Keeps the first `keep` complete lines of `path`.
fn truncate_history(path: &Path, keep: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let mut kept = String::new();
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    for _ in 0..keep {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            bail!("{} has fewer records than its checkpoint", path.display());
        }
        kept.push_str(&line);
    }
    fs::write(path, kept)?;
    Ok(())
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn history(&self) -> PathBuf {
        self.root.join("history.jsonl")
    }
    fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }
    fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// Opens the recorder and loads the checkpoint when resuming.
fn open_run<S: DeserializeOwned>(dir: &RunDir, resume: bool) -> Result<(Recorder, Option<S>)> {
    let (events, state) = if resume && dir.state().exists() {
        let cp: Checkpoint<S> = read_json(&dir.state()).context("cannot read checkpoint")?;
        (cp.events, Some(cp.state))
    } else {
        (0, None)
    };
    truncate_history(&dir.history(), events)?;
    let history = HistoryWriter::append(&dir.history())?;
    Ok((Recorder { history, state_path: dir.state(), events }, state))
}

fn build_trainer(
    args: &SearchArgs,
    cfg: &RunConfig,
    space: &SearchSpace,
    epochs: u32,
    bench_file: Option<SyntheticBenchmark>,
) -> Result<(Box<dyn Trainer>, String)> {
    if let Some(cmd) = external_command(args, cfg) {
        let mut t = ProcessTrainer::from_command_line(&cmd).ok_or_else(|| anyhow!("trainer command is empty"))?;
        if let Some(secs) = cfg.trainer.as_ref().and_then(|t| t.timeout_secs) {
            t = t.with_timeout(Duration::from_secs(secs));
        }
        return Ok((Box::new(t), cmd));
    }
    if let Some(b) = bench_file {
        if b.full_epochs() != epochs {
            bail!("benchmark trains for {} epochs but the strategy expects {epochs}", b.full_epochs());
        }
        return Ok((Box::new(b), format!("benchmark:{}", args.benchmark)));
    }
    Ok((Box::new(synthetic_benchmark(cfg, space, epochs)?), "synthetic".into()))
}

pub(crate) fn synthetic_benchmark(cfg: &RunConfig, space: &SearchSpace, epochs: u32) -> Result<SyntheticBenchmark> {
    let s = &cfg.benchmark;
    let bench = match s.kind {
        BenchmarkKind::Bowl => SyntheticBenchmark::quadratic_bowl(space.clone(), epochs)?,
        BenchmarkKind::Seeded => SyntheticBenchmark::seeded(space.clone(), epochs, s.noise, s.seed)?,
    };
    Ok(bench.with_curriculum_effect(s.curriculum))
}

fn external_command(args: &SearchArgs, cfg: &RunConfig) -> Option<String> {
    args.trainer_cmd.clone().or_else(|| cfg.trainer.as_ref().map(|t| t.command.clone()))
}

pub(crate) fn full_epochs(cfg: &RunConfig, strategy: Strategy) -> u32 {
    match strategy {
        Strategy::Grm => cfg.grm.full_epochs,
        Strategy::Timfbo => cfg.timfbo.full_epochs,
        Strategy::Ecco => cfg.ecco.full_epochs,
    }
}

fn strategy_config(cfg: &RunConfig, strategy: Strategy) -> serde_json::Value {
    match strategy {
        Strategy::Grm => serde_json::json!({ "grm": cfg.grm, "actions": cfg.actions, "benchmark": cfg.benchmark }),
        Strategy::Timfbo => {
            serde_json::json!({ "timfbo": cfg.timfbo, "proxy": cfg.proxy, "benchmark": cfg.benchmark })
        }
        Strategy::Ecco => serde_json::json!({ "ecco": cfg.ecco, "benchmark": cfg.benchmark }),
    }
}

/// Maps the run budget onto the strategy's own unit: GRM episodes, TI-MFBO
/// full-fidelity trials, ECCO generations.
pub(crate) fn apply_budget(cfg: &mut RunConfig, strategy: Strategy) -> Result<()> {
    match strategy {
        Strategy::Grm => {
            if let Some(b) = cfg.budget {
                cfg.grm.max_episodes = b.round() as usize;
            }
            cfg.grm.validate()?;
        }
        Strategy::Timfbo => {
            cfg.budget.get_or_insert(DEFAULT_TIMFBO_BUDGET);
            cfg.timfbo.validate()?;
        }
        Strategy::Ecco => {
            if let Some(b) = cfg.budget {
                cfg.ecco.generations = b.round() as usize;
            }
            cfg.ecco.validate()?;
        }
    }
    Ok(())
}

pub fn cmd_search(args: &SearchArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if args.budget.is_some() {
        cfg.budget = args.budget;
    }
    cfg.validate()?;
    let epochs = full_epochs(&cfg, args.strategy);

    // A benchmark file carries its own space.
    let bench_file: Option<SyntheticBenchmark> =
        if args.benchmark != "synthetic" && external_command(args, &cfg).is_none() {
            Some(
                read_json(Path::new(&args.benchmark))
                    .with_context(|| format!("cannot load benchmark {}", args.benchmark))?,
            )
        } else {
            None
        };
    let space = match &bench_file {
        Some(b) => b.space().clone(),
        None => cfg.resolve_space()?.ok_or_else(|| anyhow!("the configuration names no search space"))?,
    };
    let (trainer, trainer_name) = build_trainer(args, &cfg, &space, epochs, bench_file)?;

    apply_budget(&mut cfg, args.strategy)?;

    let run_id = args.run_id.clone().unwrap_or_else(|| format!("{}-seed{}", args.strategy.name(), args.seed));
    let dir = RunDir { root: args.output.join(&run_id) };
    let manifest = RunManifest {
        run_id: run_id.clone(),
        strategy: args.strategy,
        space: match &cfg.space {
            Some(SpaceSource::Path(p)) => p.display().to_string(),
            _ if args.benchmark != "synthetic" => args.benchmark.clone(),
            _ => "inline".into(),
        },
        trainer: trainer_name,
        seed: args.seed,
        budget: cfg.budget,
        output: args.output.display().to_string(),
        config: strategy_config(&cfg, args.strategy),
    };
    if dir.manifest().exists() {
        if !args.resume {
            bail!("run {run_id} already exists in {}; pass --resume or choose another --run-id", args.output.display());
        }
        let old: RunManifest = read_json(&dir.manifest())?;
        if old != manifest {
            bail!("run {run_id} was started with different settings; refusing to resume");
        }
    } else {
        fs::create_dir_all(&dir.root).with_context(|| format!("cannot create {}", dir.root.display()))?;
        write_json_atomic(&dir.manifest(), &manifest)?;
    }

    let exec = Executor::new(args.workers);
    let trainer = trainer.as_ref();
    let (best, summary) = match args.strategy {
        Strategy::Grm => {
            let (mut rec, resume) = open_run::<GrmState>(&dir, args.resume)?;
            run_grm(&space, trainer, &cfg, args.seed, resume, &exec, &mut rec)?
        }
        Strategy::Timfbo => {
            let (mut rec, resume) = open_run::<TimfboState>(&dir, args.resume)?;
            run_timfbo(&space, trainer, &cfg, args.seed, resume, &exec, &mut rec)?
        }
        Strategy::Ecco => {
            let (mut rec, resume) = open_run::<EccoState>(&dir, args.resume)?;
            run_ecco(&space, trainer, &cfg, args.seed, resume, &exec, &mut rec)?
        }
    };
    write_json_atomic(&dir.root.join("best_config.json"), &best)?;
    write_json_atomic(&dir.root.join("summary.json"), &summary)?;
    println!(
        "{} run {run_id}: best {} {} score {:.6}{}",
        args.strategy.name(),
        best.class,
        serde_json::to_string(&best.config)?,
        best.score,
        if best.predicted { " (predicted)" } else { "" }
    );
    println!("artifacts in {}", dir.root.display());
    Ok(())
}

pub(crate) fn run_grm(
    space: &SearchSpace,
    trainer: &dyn Trainer,
    cfg: &RunConfig,
    seed: u64,
    resume: Option<GrmState>,
    exec: &Executor,
    obs: &mut dyn SearchObserver<GrmEvent, GrmState>,
) -> Result<(BestConfig, serde_json::Value)> {
    let actions = discretize_capped(space, cfg.actions.bins, cfg.actions.cap, seed)?;
    let out = grm_search(space, &actions, trainer, &cfg.grm, seed, resume, exec, obs)?;
    // The class whose greedy action has the highest value.
    let mut best: Option<(ArchitectureClass, usize, f64)> = None;
    for (class, &a) in &out.policy {
        let q = out.q().value(class, a)?;
        if best.as_ref().is_none_or(|b| q > b.2) {
            best = Some((class.clone(), a, q));
        }
    }
    let (class, action, q) = best.ok_or_else(|| anyhow!("search produced no policy"))?;
    let config = actions.get(action).expect("policy action is in range").clone();
    let policy: Vec<serde_json::Value> = out
        .policy
        .iter()
        .map(|(c, &a)| serde_json::json!({ "class": c, "action": a, "config": actions.get(a) }))
        .collect();
    let st = &out.state;
    let summary = serde_json::json!({
        "episodes": st.next_episode,
        "actions": actions.len(),
        "phase1_epochs": st.phase1_epochs,
        "phase2_epochs": st.phase2_epochs,
        "phase1_cost": st.phase1_cost,
        "phase2_cost": st.phase2_cost,
        "policy": policy,
    });
    let best =
        BestConfig { strategy: Strategy::Grm, class, config, score: q, action: Some(action), curriculum: None, predicted: false };
    Ok((best, summary))
}

pub(crate) fn run_timfbo(
    space: &SearchSpace,
    trainer: &dyn Trainer,
    cfg: &RunConfig,
    seed: u64,
    resume: Option<TimfboState>,
    exec: &Executor,
    obs: &mut dyn SearchObserver<TimfboTrial, TimfboState>,
) -> Result<(BestConfig, serde_json::Value)> {
    let schedule = cfg.timfbo.schedule()?;
    let proxy: Option<ProxyDataset> = match &cfg.proxy {
        Some(p) => Some(read_json(p).with_context(|| format!("cannot load proxy data {}", p.display()))?),
        None => None,
    };
    let budget = cfg.budget.unwrap_or(DEFAULT_TIMFBO_BUDGET);
    let out =
        timfbo_search(space, trainer, &schedule, proxy.as_ref(), budget, &cfg.timfbo, seed, resume, exec, obs)?;
    let inc = out.incumbent.clone().ok_or_else(|| anyhow!("no trial succeeded"))?;
    let st = &out.state;
    let summary = serde_json::json!({
        "trials": st.trials.len(),
        "full_evaluations": out.full_evaluations(schedule.top()),
        "cost": st.cost,
        "budget": budget,
        "failures": st.failures,
        "rung_epochs": schedule.rungs(),
    });
    let best = BestConfig {
        strategy: Strategy::Timfbo,
        class: inc.class,
        config: inc.config,
        score: inc.y,
        action: None,
        curriculum: None,
        predicted: inc.predicted,
    };
    Ok((best, summary))
}

pub(crate) fn run_ecco(
    space: &SearchSpace,
    trainer: &dyn Trainer,
    cfg: &RunConfig,
    seed: u64,
    resume: Option<EccoState>,
    exec: &Executor,
    obs: &mut dyn SearchObserver<EccoEvent, EccoState>,
) -> Result<(BestConfig, serde_json::Value)> {
    let out = ecco_search(space, trainer, &cfg.ecco, seed, resume, exec, obs)?;
    let st = &out.state;
    let history: &[GenerationSummary] = &out.history;
    let summary = serde_json::json!({
        "generations": st.generation,
        "cost": st.cost,
        "failures": st.failures,
        "best_performance": out.best.fitness.performance,
        "best_cost": out.best.fitness.cost,
        "history": history,
    });
    let g = out.best.genome;
    let best = BestConfig {
        strategy: Strategy::Ecco,
        class: g.class,
        config: g.hyperparams,
        score: out.best.fitness.scalar,
        action: None,
        curriculum: Some(g.curriculum),
        predicted: false,
    };
    Ok((best, summary))
}
