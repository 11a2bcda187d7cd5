use std::io;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::acquisition::{cost_aware_acquisition, expected_improvement};
use super::gp::{GpError, GpSurrogate, Kernel, Observation};
use super::halving::{promote_indices, FidelitySchedule, HalvingError};
use super::{proxy_noise, ProxyDataset};
use crate::history::SearchObserver;
use crate::parallel::Executor;
use crate::seed;
use crate::space::{
    decode_unit_cube, encode_unit_cube, encoded_dim, sample_with, ArchitectureClass, Configuration, SearchSpace,
    SpaceError,
};
use crate::trainer::{run_trial, Trainer, TrialError};

const PROPOSE: u64 = 1;
const TRIAL: u64 = 2;

/// Queries per posterior batch. Fixed so results do not depend on the
/// number of workers.
const CHUNK: usize = 256;

/// Slack for comparing sums of rung costs against the budget.
const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TimfboError {
    #[error("invalid TI-MFBO settings: {0}")]
    InvalidConfig(String),
    #[error("budget {budget} is below the cost {top_cost} of one full-fidelity trial")]
    BudgetTooSmall { budget: f64, top_cost: f64 },
    #[error("proxy point {index} has dimension {found}, the surrogate expects {expected}")]
    ProxyDimension { index: usize, expected: usize, found: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Halving(#[from] HalvingError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{failures} trials failed, more than the cap allows; last error")]
    TooManyFailures {
        failures: usize,
        #[source]
        last: TrialError,
    },
    #[error("unknown architecture class {0:?}")]
    UnknownClass(String),
    #[error("class {class:?} encodes to {found} inputs but {expected} are shared by the surrogate; overrides must keep the encoded width")]
    ClassWidth { class: String, expected: usize, found: usize },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("failed to persist progress: {0}")]
    Persist(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimfboConfig {
    pub full_epochs: u32,
    pub num_rungs: usize,
    pub eta: usize,
    /// Results per rung before a promotion round; defaults to `eta`.
    pub batch_size: Option<usize>,
    pub lengthscale: f64,
    pub fidelity_lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub optimize_hyperparameters: bool,
    pub pool_size: usize,
    pub refine_top: usize,
    pub refine_steps: usize,
    pub refine_scale: f64,
    /// Weight of proxy observations in (0, 1].
    pub discount: f64,
    pub max_failures: usize,
}

impl Default for TimfboConfig {
    fn default() -> Self {
        Self {
            full_epochs: 100,
            num_rungs: 3,
            eta: 3,
            batch_size: None,
            lengthscale: 0.3,
            fidelity_lengthscale: 1.0,
            signal_variance: 1.0,
            noise_variance: 1e-4,
            optimize_hyperparameters: false,
            pool_size: 2048,
            refine_top: 8,
            refine_steps: 16,
            refine_scale: 0.05,
            discount: 0.5,
            max_failures: 5,
        }
    }
}

impl TimfboConfig {
    pub fn validate(&self) -> Result<(), TimfboError> {
        let bad = |m: &str| Err(TimfboError::InvalidConfig(m.into()));
        if self.pool_size == 0 {
            return bad("pool_size must be at least 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1");
        }
        if !(self.refine_scale.is_finite() && self.refine_scale >= 0.0) {
            return bad("refine_scale must be finite and non-negative");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        self.kernel(1).validate()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<FidelitySchedule, TimfboError> {
        Ok(FidelitySchedule::geometric(self.full_epochs, self.num_rungs, self.eta)?)
    }

    /// Kernel over `config_dim` configuration inputs plus the fidelity input.
    pub fn kernel(&self, config_dim: usize) -> Kernel {
        let mut lengthscales = vec![self.lengthscale; config_dim];
        lengthscales.push(self.fidelity_lengthscale);
        Kernel { lengthscales, signal_variance: self.signal_variance, noise_variance: self.noise_variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialSource {
    Proposal { acquisition: f64 },
    /// Full-fidelity run of the best predicted configuration, spent because
    /// the remaining budget had to cover one full trial.
    Reserve { predicted: f64 },
    Promotion { parent: usize },
}

/// One evaluation, in the order it was merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimfboTrial {
    pub index: usize,
    pub class: ArchitectureClass,
    pub config: Configuration,
    pub rung: usize,
    pub epochs: u32,
    pub cost: f64,
    /// Cumulative cost including this trial.
    pub total_cost: f64,
    /// Final performance at the top rung, the last validation signal below it.
    pub y: Option<f64>,
    pub source: TrialSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A promoted configuration waiting for its next-rung trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub class: ArchitectureClass,
    pub config: Configuration,
    pub rung: usize,
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimfboState {
    pub trials: Vec<TimfboTrial>,
    pub queue: Vec<Pending>,
    /// Per rung, successful trials not yet considered for promotion.
    pub open: Vec<Vec<usize>>,
    pub cost: f64,
    pub failures: usize,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub class: ArchitectureClass,
    pub config: Configuration,
    pub y: f64,
    /// `y` is a surrogate prediction because no full-fidelity trial finished.
    pub predicted: bool,
}

#[derive(Debug, Clone)]
pub struct TimfboOutcome {
    pub incumbent: Option<Incumbent>,
    pub state: TimfboState,
}

impl TimfboOutcome {
    pub fn full_evaluations(&self, top: usize) -> usize {
        self.state.trials.iter().filter(|t| t.rung == top && t.error.is_none()).count()
    }
}

/// Surrogate input of `config` without the fidelity coordinate: its unit-cube
/// encoding in the class's own space, then a one-hot class block when the
/// space has several classes.
pub fn surrogate_encoding(
    space: &SearchSpace,
    class: &ArchitectureClass,
    config: &Configuration,
) -> Result<Vec<f64>, TimfboError> {
    let classes = space.classes();
    let ci = classes.iter().position(|c| c == class).ok_or_else(|| TimfboError::UnknownClass(class.to_string()))?;
    Ok(encode_with_class(&space.for_class(class), ci, classes.len(), config)?)
}

fn encode_with_class(local: &SearchSpace, ci: usize, n_classes: usize, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
    let mut x = encode_unit_cube(local, config)?;
    if n_classes > 1 {
        x.extend((0..n_classes).map(|c| if c == ci { 1.0 } else { 0.0 }));
    }
    Ok(x)
}

struct Candidate {
    class: usize,
    config: Configuration,
    x: Vec<f64>,
}

struct Job {
    class: usize,
    config: Configuration,
    rung: usize,
    source: TrialSource,
}

struct Search<'a> {
    classes: &'a [ArchitectureClass],
    local: Vec<SearchSpace>,
    schedule: &'a FidelitySchedule,
    cfg: &'a TimfboConfig,
    proxy: Option<&'a ProxyDataset>,
    exec: &'a Executor,
    config_dim: usize,
    seed: u64,
}

impl Search<'_> {
    fn encode(&self, ci: usize, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
        encode_with_class(&self.local[ci], ci, self.classes.len(), config)
    }

    fn class_index(&self, class: &ArchitectureClass) -> Result<usize, TimfboError> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| TimfboError::UnknownClass(class.to_string()))
    }

    fn with_fidelity(x: &[f64], coord: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(x.len() + 1);
        v.extend_from_slice(x);
        v.push(coord);
        v
    }

    fn fit(&self, state: &TimfboState) -> Result<GpSurrogate, TimfboError> {
        let kernel = self.cfg.kernel(self.config_dim);
        let mut obs = Vec::new();
        if let Some(p) = self.proxy {
            let noise = proxy_noise(&kernel, self.cfg.discount)?;
            for pt in &p.points {
                obs.push(Observation { x: Self::with_fidelity(&pt.x, p.fidelity), y: pt.y, noise: Some(noise) });
            }
        }
        for t in &state.trials {
            if let Some(y) = t.y {
                let x = self.encode(self.class_index(&t.class)?, &t.config)?;
                obs.push(Observation::new(Self::with_fidelity(&x, self.schedule.coordinate(t.rung)), y));
            }
        }
        Ok(if self.cfg.optimize_hyperparameters {
            GpSurrogate::fit_optimized(obs, kernel)?
        } else {
            GpSurrogate::fit(obs, kernel)?
        })
    }

    fn posterior(&self, gp: &GpSurrogate, queries: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, GpError> {
        let chunks: Vec<&[Vec<f64>]> = queries.chunks(CHUNK).collect();
        let parts = self.exec.map(&chunks, |_, c| gp.posterior_batch(c));
        let mut out = Vec::with_capacity(queries.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Per-rung incumbent value used by EI.
    fn reference_values(&self, gp: &GpSurrogate, state: &TimfboState) -> Result<Vec<f64>, TimfboError> {
        let mut observed_x = Vec::new();
        for t in state.trials.iter().filter(|t| t.y.is_some()) {
            observed_x.push(self.encode(self.class_index(&t.class)?, &t.config)?);
        }
        let mut out = Vec::with_capacity(self.schedule.len());
        for r in 0..self.schedule.len() {
            let best = state.trials.iter().filter(|t| t.rung == r).filter_map(|t| t.y).fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                out.push(best);
            } else if observed_x.is_empty() {
                out.push(0.0);
            } else {
                let c = self.schedule.coordinate(r);
                let q: Vec<Vec<f64>> = observed_x.iter().map(|x| Self::with_fidelity(x, c)).collect();
                out.push(self.posterior(gp, &q)?.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
            }
        }
        Ok(out)
    }

    /// Best (score, rung) of each candidate.
    fn score(&self, gp: &GpSurrogate, cands: &[Candidate], best: &[f64]) -> Result<Vec<(f64, usize)>, TimfboError> {
        let rungs = self.schedule.len();
        let mut queries = Vec::with_capacity(cands.len() * rungs);
        for c in cands {
            for r in 0..rungs {
                queries.push(Self::with_fidelity(&c.x, self.schedule.coordinate(r)));
            }
        }
        let post = self.posterior(gp, &queries)?;
        let mut out = Vec::with_capacity(cands.len());
        for chunk in post.chunks(rungs) {
            let mut top = (f64::NEG_INFINITY, 0);
            for (r, &(m, v)) in chunk.iter().enumerate() {
                let s = cost_aware_acquisition(expected_improvement(m, v.sqrt(), best[r]), self.schedule.cost(r))?;
                if s > top.0 {
                    top = (s, r);
                }
            }
            out.push(top);
        }
        Ok(out)
    }

    fn propose(&self, state: &TimfboState) -> Result<(usize, Configuration, usize, f64), TimfboError> {
        let gp = self.fit(state)?;
        let best = self.reference_values(&gp, state)?;
        let mut rng = seed::rng_for(self.seed, &[PROPOSE, state.iteration]);
        let mut cands = Vec::with_capacity(self.cfg.pool_size);
        for _ in 0..self.cfg.pool_size {
            let ci = rng.random_range(0..self.classes.len());
            let config = sample_with(&self.local[ci], &mut rng);
            let x = self.encode(ci, &config)?;
            cands.push(Candidate { class: ci, config, x });
        }
        let mut scores = self.score(&gp, &cands, &best)?;

        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0));
        let mut local = Vec::new();
        for &i in order.iter().take(self.cfg.refine_top) {
            let ci = cands[i].class;
            for _ in 0..self.cfg.refine_steps {
                let x: Vec<f64> = cands[i].x[..encoded_dim(&self.local[ci])]
                    .iter()
                    .map(|v| {
                        let z: f64 = rng.sample(StandardNormal);
                        (v + self.cfg.refine_scale * z).clamp(0.0, 1.0)
                    })
                    .collect();
                let config = decode_unit_cube(&self.local[ci], &x)?;
                let x = self.encode(ci, &config)?;
                local.push(Candidate { class: ci, config, x });
            }
        }
        scores.extend(self.score(&gp, &local, &best)?);
        cands.extend(local);

        let mut pick = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.0 > scores[pick].0 {
                pick = i;
            }
        }
        let c = cands.swap_remove(pick);
        Ok((c.class, c.config, scores[pick].1, scores[pick].0))
    }

    /// Bumps a rung to the top when running it could leave too little budget
    /// for any full-fidelity result.
    fn reserve(&self, state: &TimfboState, planned: f64, rung: usize, budget: f64) -> bool {
        let top = self.schedule.top();
        rung != top
            && !state.trials.iter().any(|t| t.rung == top && t.y.is_some())
            && planned + self.schedule.cost(rung) + self.schedule.cost(top) > budget + EPS
    }

    /// Observed configuration with the highest predicted full-fidelity mean.
    fn best_predicted(&self, state: &TimfboState) -> Result<Option<(usize, Configuration, f64)>, TimfboError> {
        let mut seen: Vec<(usize, &Configuration)> = Vec::new();
        for t in state.trials.iter().filter(|t| t.y.is_some()) {
            let ci = self.class_index(&t.class)?;
            if !seen.iter().any(|&(c, cfg)| c == ci && cfg == &t.config) {
                seen.push((ci, &t.config));
            }
        }
        if seen.is_empty() {
            return Ok(None);
        }
        let gp = self.fit(state)?;
        let mut q = Vec::with_capacity(seen.len());
        for &(ci, config) in &seen {
            q.push(Self::with_fidelity(&self.encode(ci, config)?, self.schedule.coordinate(self.schedule.top())));
        }
        let post = self.posterior(&gp, &q)?;
        let mut i = 0;
        for (k, p) in post.iter().enumerate() {
            if p.0 > post[i].0 {
                i = k;
            }
        }
        Ok(Some((seen[i].0, seen[i].1.clone(), post[i].0)))
    }

    fn reserve_job(&self, state: &TimfboState) -> Result<Job, TimfboError> {
        let (class, config, predicted) = match self.best_predicted(state)? {
            Some(b) => b,
            None => {
                let (ci, config, _, _) = self.propose(state)?;
                let gp = self.fit(state)?;
                let x = Self::with_fidelity(&self.encode(ci, &config)?, 1.0);
                let m = gp.posterior(&x)?.0;
                (ci, config, m)
            }
        };
        Ok(Job { class, config, rung: self.schedule.top(), source: TrialSource::Reserve { predicted } })
    }

    fn incumbent(&self, state: &TimfboState) -> Result<Option<Incumbent>, TimfboError> {
        let top = self.schedule.top();
        let mut best: Option<&TimfboTrial> = None;
        for t in state.trials.iter().filter(|t| t.rung == top && t.y.is_some()) {
            if best.is_none_or(|b| t.y > b.y) {
                best = Some(t);
            }
        }
        if let Some(b) = best {
            return Ok(Some(Incumbent {
                class: b.class.clone(),
                config: b.config.clone(),
                y: b.y.expect("filtered"),
                predicted: false,
            }));
        }
        Ok(self.best_predicted(state)?.map(|(ci, config, y)| Incumbent {
            class: self.classes[ci].clone(),
            config,
            y,
            predicted: true,
        }))
    }
}

/// Runs TI-MFBO until the accumulated rung cost reaches `budget`, measured
/// in full-fidelity trial equivalents (the top rung's cost).
///
/// Each iteration either runs every queued promotion that still fits the
/// budget as one parallel batch, or proposes one (configuration, rung) pair
/// by cost-aware EI. Results are merged in job order, every `batch_size`
/// successful results at a rung trigger a promotion round, and the state is
/// checkpointed. Until a full-fidelity result exists, once any cheaper trial
/// would leave less than one full trial of budget, the best predicted
/// configuration seen so far is run at full fidelity instead.
#[allow(clippy::too_many_arguments)]
pub fn timfbo_search(
    space: &SearchSpace,
    trainer: &dyn Trainer,
    schedule: &FidelitySchedule,
    proxy: Option<&ProxyDataset>,
    budget: f64,
    cfg: &TimfboConfig,
    seed: u64,
    resume: Option<TimfboState>,
    exec: &Executor,
    observer: &mut dyn SearchObserver<TimfboTrial, TimfboState>,
) -> Result<TimfboOutcome, TimfboError> {
    cfg.validate()?;
    let top = schedule.top();
    let top_cost = schedule.cost(top);
    if !(budget.is_finite() && budget >= top_cost - EPS) {
        return Err(TimfboError::BudgetTooSmall { budget, top_cost });
    }
    let classes = space.classes();
    let local: Vec<SearchSpace> = classes.iter().map(|c| space.for_class(c)).collect();
    // One GP spans every class, so all classes must encode to the same width.
    let width = encoded_dim(&local[0]);
    if let Some((c, l)) = classes.iter().zip(&local).find(|(_, l)| encoded_dim(l) != width) {
        return Err(TimfboError::ClassWidth { class: c.to_string(), expected: width, found: encoded_dim(l) });
    }
    let config_dim = width + if classes.len() > 1 { classes.len() } else { 0 };
    if let Some(p) = proxy {
        for (index, pt) in p.points.iter().enumerate() {
            if pt.x.len() != config_dim {
                return Err(TimfboError::ProxyDimension { index, expected: config_dim, found: pt.x.len() });
            }
            if !pt.y.is_finite() || pt.x.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite(index).into());
            }
        }
    }
    let s = Search { classes, local, schedule, cfg, proxy, exec, config_dim, seed };
    let batch = cfg.batch_size.unwrap_or(schedule.eta());

    let mut state = match resume {
        Some(st) => {
            if st.open.len() != schedule.len() || st.queue.iter().any(|p| p.rung > top) {
                return Err(TimfboError::Resume("checkpoint does not match the fidelity schedule".into()));
            }
            st
        }
        None => TimfboState { open: vec![Vec::new(); schedule.len()], ..Default::default() },
    };

    while state.cost < budget - EPS {
        let mut jobs = Vec::new();
        let mut planned = state.cost;
        let mut taken = 0;
        for p in &state.queue {
            if planned >= budget - EPS || s.reserve(&state, planned, p.rung, budget) {
                break;
            }
            planned += schedule.cost(p.rung);
            jobs.push(Job {
                class: s.class_index(&p.class)?,
                config: p.config.clone(),
                rung: p.rung,
                source: TrialSource::Promotion { parent: p.parent },
            });
            taken += 1;
        }
        state.queue.drain(..taken);
        if jobs.is_empty() {
            let job = if s.reserve(&state, state.cost, 0, budget) {
                s.reserve_job(&state)?
            } else {
                let (class, config, rung, acquisition) = s.propose(&state)?;
                if s.reserve(&state, state.cost, rung, budget) {
                    s.reserve_job(&state)?
                } else {
                    Job { class, config, rung, source: TrialSource::Proposal { acquisition } }
                }
            };
            jobs.push(job);
        }

        let first = state.trials.len();
        let results = exec.map(&jobs, |k, j| {
            let trial_seed = seed::derive(seed, &[TRIAL, (first + k) as u64]);
            run_trial(trainer, &classes[j.class], &j.config, schedule.level(j.rung), trial_seed)
        });

        let mut fatal = None;
        for (job, res) in jobs.into_iter().zip(results) {
            let index = state.trials.len();
            let level = schedule.level(job.rung);
            let (epochs, y, error) = match res {
                Ok(rec) => {
                    let y = if level.top { rec.final_performance } else { rec.observed_performance() };
                    (rec.log.completed(), y, None)
                }
                Err(e) => {
                    state.failures += 1;
                    let done = e.partial_log().map_or(0, |l| l.completed());
                    let msg = e.to_string();
                    if state.failures > cfg.max_failures && fatal.is_none() {
                        fatal = Some(e);
                    }
                    (done, None, Some(msg))
                }
            };
            let cost = schedule.cost(job.rung) * f64::from(epochs) / f64::from(level.epoch_budget);
            state.cost += cost;
            let trial = TimfboTrial {
                index,
                class: classes[job.class].clone(),
                config: job.config,
                rung: job.rung,
                epochs,
                cost,
                total_cost: state.cost,
                y,
                source: job.source,
                error,
            };
            observer.event(&trial)?;
            state.trials.push(trial);

            if y.is_some() && job.rung < top {
                state.open[job.rung].push(index);
                if state.open[job.rung].len() >= batch {
                    let members = std::mem::take(&mut state.open[job.rung]);
                    let ys: Vec<f64> = members.iter().map(|&i| state.trials[i].y.expect("open trials succeeded")).collect();
                    for w in promote_indices(&ys, schedule.eta())? {
                        let t = &state.trials[members[w]];
                        state.queue.push(Pending {
                            class: t.class.clone(),
                            config: t.config.clone(),
                            rung: job.rung + 1,
                            parent: t.index,
                        });
                    }
                }
            }
        }
        state.iteration += 1;
        observer.checkpoint(&state)?;
        if let Some(last) = fatal {
            return Err(TimfboError::TooManyFailures { failures: state.failures, last });
        }
    }

    let incumbent = s.incumbent(&state)?;
    Ok(TimfboOutcome { incumbent, state })
}
