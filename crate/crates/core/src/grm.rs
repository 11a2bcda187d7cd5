//! Reward-machine search.
//!
//! Phase 1 trains a few sampled configurations per architecture class to
//! completion and fits a linear map `P ≈ W_c · v` from the dynamics features
//! `v` of each trial's early epochs to its final performance. Phase 2 runs
//! single-step episodes: pick a class round-robin, choose an action
//! epsilon-greedily, train it for a few epochs only, score the short log with
//! `W_c`, and move `Q(c, a)` towards that score. Episodes have no successor
//! state, so the update carries no discounted bootstrap term.

use std::collections::BTreeMap;
use std::io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::SearchObserver;
use crate::parallel::Executor;
use crate::seed;
use crate::space::{sample_random, ActionSet, ArchitectureClass, Configuration, SearchSpace, SpaceError};
use crate::trainer::{
    extract_dynamics_features, run_trial, DynamicsFeatures, FeatureError, FidelityLevel, Trainer, TrialError,
    TrialRecord, FEATURE_DIM,
};

const PHASE1: u64 = 1;
const PHASE2: u64 = 2;

#[derive(Debug, Error)]
pub enum GrmError {
    #[error("invalid GRM settings: {0}")]
    InvalidConfig(String),
    #[error("class {class:?} has {found} usable trials, the reward model needs at least {needed}")]
    InsufficientTrials { class: String, found: usize, needed: usize },
    #[error("reward-model trials mix classes {0:?} and {1:?}")]
    MixedClasses(String, String),
    #[error("trial {0} has no final performance (not run at full fidelity)")]
    MissingPerformance(usize),
    #[error("feature vector has {found} entries, the model has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown architecture class {0:?}")]
    UnknownClass(String),
    #[error("action {action} is outside an action set of size {len}")]
    ActionOutOfRange { action: usize, len: usize },
    #[error("action set is empty")]
    EmptyActions,
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("phase-1 trial {sample} of class {class:?} failed: {source}")]
    SampleTrial {
        class: String,
        sample: usize,
        #[source]
        source: TrialError,
    },
    #[error("episode {episode} failed: {source}")]
    EpisodeTrial {
        episode: usize,
        #[source]
        source: TrialError,
    },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("failed to persist progress: {0}")]
    Persist(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrmConfig {
    /// Full-fidelity trials per class in Phase 1.
    pub num_samples_phase1: usize,
    pub max_episodes: usize,
    pub epsilon_initial: f64,
    pub epsilon_floor: f64,
    /// Per-episode multiplier; by default chosen so epsilon reaches the floor
    /// at the last episode.
    pub epsilon_decay: Option<f64>,
    pub alpha: f64,
    pub full_epochs: u32,
    /// Epochs per Phase-2 trial; defaults to 20% of `full_epochs`, rounded up.
    pub partial_epochs: Option<u32>,
    pub ridge_lambda: f64,
    pub clip_reward: bool,
}

impl Default for GrmConfig {
    fn default() -> Self {
        Self {
            num_samples_phase1: 8,
            max_episodes: 200,
            epsilon_initial: 1.0,
            epsilon_floor: 0.05,
            epsilon_decay: None,
            alpha: 0.5,
            full_epochs: 100,
            partial_epochs: None,
            ridge_lambda: 1e-6,
            clip_reward: false,
        }
    }
}

impl GrmConfig {
    pub fn validate(&self) -> Result<(), GrmError> {
        let bad = |m: &str| Err(GrmError::InvalidConfig(m.into()));
        if self.num_samples_phase1 == 0 {
            return bad("num_samples_phase1 must be at least 1");
        }
        if self.full_epochs == 0 {
            return bad("full_epochs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_initial) || !(0.0..=1.0).contains(&self.epsilon_floor) {
            return bad("epsilon_initial and epsilon_floor must lie in [0, 1]");
        }
        if let Some(d) = self.epsilon_decay {
            if !(d > 0.0 && d <= 1.0) {
                return bad("epsilon_decay must lie in (0, 1]");
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        let p = self.partial_epochs();
        if p == 0 || p > self.full_epochs {
            return bad("partial_epochs must lie in 1..=full_epochs");
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad("ridge_lambda must be finite and non-negative");
        }
        Ok(())
    }

    pub fn partial_epochs(&self) -> u32 {
        self.partial_epochs.unwrap_or(self.full_epochs.div_ceil(5))
    }

    /// Exploration rate of 0-based episode `e`.
    pub fn epsilon(&self, e: usize) -> f64 {
        let (init, floor) = (self.epsilon_initial, self.epsilon_floor);
        let decay = self.epsilon_decay.unwrap_or_else(|| {
            if self.max_episodes >= 2 && init > floor && floor > 0.0 {
                (floor / init).powf(1.0 / (self.max_episodes - 1) as f64)
            } else {
                1.0
            }
        });
        (init * decay.powi(e as i32)).max(floor)
    }
}

/// Linear map from dynamics features to final performance for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub class: ArchitectureClass,
    pub weights: Vec<f64>,
    /// Root-mean-square residual on the fitting data.
    pub fit_residual: f64,
}

/// Ridge least squares `argmin |V w - y|^2 + lambda |D w|^2`, where `D`
/// scales each column to unit root-mean-square so the penalty does not
/// depend on feature units. Solved through an SVD of the scaled design.
pub fn fit_linear(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<(Vec<f64>, f64), GrmError> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n != targets.len() {
        return Err(GrmError::DimensionMismatch { expected: n, found: targets.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(GrmError::DimensionMismatch { expected: d, found: r.len() });
    }
    let v = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let rms = (v.column(j).norm_squared() / n as f64).sqrt();
            if rms > 0.0 {
                rms
            } else {
                1.0
            }
        })
        .collect();
    let z = DMatrix::from_fn(n, d, |i, j| v[(i, j)] / scale[j]);
    let y = DVector::from_column_slice(targets);
    let svd = z.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let smax = svd.singular_values.max();
    let cutoff = smax * (n.max(d) as f64) * f64::EPSILON;
    let mut wz = DVector::zeros(d);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff && lambda == 0.0 {
            continue;
        }
        let coef = s / (s * s + lambda) * u.column(k).dot(&y);
        wz += coef * vt.row(k).transpose();
    }
    let w: Vec<f64> = (0..d).map(|j| wz[j] / scale[j]).collect();
    let resid = &v * DVector::from_column_slice(&w) - y;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok((w, rms))
}

/// Fits the reward model of one class. Features come from the first
/// `feature_epochs` epochs of each log (the whole log when `None`), so the
/// model sees the same horizon as the short trials it later scores.
pub fn estimate_reward_model(
    trials: &[TrialRecord],
    feature_epochs: Option<u32>,
    lambda: f64,
) -> Result<RewardModel, GrmError> {
    let class = trials.first().map(|t| t.arch.clone()).ok_or_else(|| GrmError::InsufficientTrials {
        class: String::new(),
        found: 0,
        needed: FEATURE_DIM,
    })?;
    if trials.len() < FEATURE_DIM {
        return Err(GrmError::InsufficientTrials {
            class: class.name().to_string(),
            found: trials.len(),
            needed: FEATURE_DIM,
        });
    }
    let mut rows = Vec::with_capacity(trials.len());
    let mut targets = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        if t.arch != class {
            return Err(GrmError::MixedClasses(class.name().to_string(), t.arch.name().to_string()));
        }
        let p = t.final_performance.ok_or(GrmError::MissingPerformance(i))?;
        let log = feature_epochs.map_or_else(|| t.log.clone(), |n| t.log.truncated(n));
        rows.push(extract_dynamics_features(&log)?.0.to_vec());
        targets.push(p);
    }
    let (weights, fit_residual) = fit_linear(&rows, &targets, lambda)?;
    Ok(RewardModel { class, weights, fit_residual })
}

/// Exact dot product, unclipped.
pub fn predict_performance(model: &RewardModel, v: &DynamicsFeatures) -> Result<f64, GrmError> {
    if model.weights.len() != FEATURE_DIM {
        return Err(GrmError::DimensionMismatch { expected: model.weights.len(), found: FEATURE_DIM });
    }
    Ok(model.weights.iter().zip(v.as_slice()).map(|(w, x)| w * x).sum())
}

/// Action values and visit counts per (class, action id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    classes: Vec<ArchitectureClass>,
    values: Vec<Vec<f64>>,
    visits: Vec<Vec<u64>>,
}

impl QTable {
    /// All values start at 0.
    pub fn new(classes: &[ArchitectureClass], num_actions: usize) -> Self {
        Self {
            classes: classes.to_vec(),
            values: vec![vec![0.0; num_actions]; classes.len()],
            visits: vec![vec![0; num_actions]; classes.len()],
        }
    }

    pub fn classes(&self) -> &[ArchitectureClass] {
        &self.classes
    }

    pub fn num_actions(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn index(&self, s: &ArchitectureClass) -> Result<usize, GrmError> {
        self.classes.iter().position(|c| c == s).ok_or_else(|| GrmError::UnknownClass(s.name().to_string()))
    }

    fn check_action(&self, a: usize) -> Result<(), GrmError> {
        if a < self.num_actions() {
            Ok(())
        } else {
            Err(GrmError::ActionOutOfRange { action: a, len: self.num_actions() })
        }
    }

    pub fn row(&self, s: &ArchitectureClass) -> Result<&[f64], GrmError> {
        Ok(&self.values[self.index(s)?])
    }

    pub fn value(&self, s: &ArchitectureClass, a: usize) -> Result<f64, GrmError> {
        self.check_action(a)?;
        Ok(self.values[self.index(s)?][a])
    }

    pub fn visits(&self, s: &ArchitectureClass, a: usize) -> Result<u64, GrmError> {
        self.check_action(a)?;
        Ok(self.visits[self.index(s)?][a])
    }

    /// `argmax_a Q(s, a)`, lowest id on ties.
    pub fn greedy(&self, s: &ArchitectureClass) -> Result<usize, GrmError> {
        let row = self.row(s)?;
        if row.is_empty() {
            return Err(GrmError::EmptyActions);
        }
        let mut best = 0;
        for (a, q) in row.iter().enumerate() {
            if *q > row[best] {
                best = a;
            }
        }
        Ok(best)
    }

    /// Greedy action of every class.
    pub fn policy(&self) -> Result<BTreeMap<ArchitectureClass, usize>, GrmError> {
        self.classes.iter().map(|c| Ok((c.clone(), self.greedy(c)?))).collect()
    }
}

/// Epsilon-greedy choice; also reports whether the random branch was taken.
fn choose(q: &QTable, s: &ArchitectureClass, epsilon: f64, rng: &mut impl Rng) -> Result<(usize, bool), GrmError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(GrmError::InvalidConfig(format!("epsilon {epsilon} is outside [0, 1]")));
    }
    let n = q.num_actions();
    if n == 0 {
        return Err(GrmError::EmptyActions);
    }
    q.index(s)?;
    if rng.random::<f64>() < epsilon {
        Ok((rng.random_range(0..n), true))
    } else {
        Ok((q.greedy(s)?, false))
    }
}

/// With probability `epsilon` a uniform action, otherwise the greedy one.
pub fn select_action(q: &QTable, s: &ArchitectureClass, epsilon: f64, rng: &mut impl Rng) -> Result<usize, GrmError> {
    choose(q, s, epsilon, rng).map(|(a, _)| a)
}

/// `Q(s, a) += alpha (reward - Q(s, a))`; returns the new value.
pub fn q_update(q: &mut QTable, s: &ArchitectureClass, a: usize, reward: f64, alpha: f64) -> Result<f64, GrmError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GrmError::InvalidConfig(format!("alpha {alpha} is outside (0, 1]")));
    }
    q.check_action(a)?;
    let i = q.index(s)?;
    let cell = &mut q.values[i][a];
    *cell += alpha * (reward - *cell);
    q.visits[i][a] += 1;
    Ok(*cell)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrmEvent {
    /// One Phase-1 full-fidelity trial.
    Sample {
        class: ArchitectureClass,
        sample: usize,
        action: usize,
        config: Configuration,
        features: DynamicsFeatures,
        performance: f64,
        epochs: u32,
        cost: f64,
    },
    /// One Phase-2 episode.
    Episode {
        episode: usize,
        class: ArchitectureClass,
        action: usize,
        config: Configuration,
        epsilon: f64,
        explored: bool,
        features: DynamicsFeatures,
        reward: f64,
        q: f64,
        epochs: u32,
        cost: f64,
    },
}

/// Everything needed to continue a run after the last finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrmState {
    pub models: Vec<RewardModel>,
    pub q: QTable,
    pub next_episode: usize,
    pub phase1_epochs: u64,
    pub phase2_epochs: u64,
    pub phase1_cost: f64,
    pub phase2_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrmOutcome {
    pub policy: BTreeMap<ArchitectureClass, usize>,
    pub state: GrmState,
    /// Events produced by this call (a resumed run omits earlier ones).
    pub audit: Vec<GrmEvent>,
}

impl GrmOutcome {
    pub fn q(&self) -> &QTable {
        &self.state.q
    }
}

/// Runs both phases, or continues from `resume`.
#[allow(clippy::too_many_arguments)]
pub fn grm_search(
    space: &SearchSpace,
    actions: &ActionSet,
    trainer: &dyn Trainer,
    cfg: &GrmConfig,
    seed: u64,
    resume: Option<GrmState>,
    exec: &Executor,
    observer: &mut dyn SearchObserver<GrmEvent, GrmState>,
) -> Result<GrmOutcome, GrmError> {
    cfg.validate()?;
    if actions.is_empty() {
        return Err(GrmError::EmptyActions);
    }
    let classes = space.classes();
    let local: Vec<SearchSpace> = classes.iter().map(|c| space.for_class(c)).collect();
    for (c, s) in classes.iter().zip(&local) {
        for a in actions.iter() {
            s.check(a).map_err(|e| GrmError::InvalidConfig(format!("action invalid for class {c}: {e}")))?;
        }
    }
    let partial = cfg.partial_epochs();
    let mut audit = Vec::new();

    let mut state = match resume {
        Some(st) => {
            if st.q.classes() != classes || st.q.num_actions() != actions.len() {
                return Err(GrmError::Resume("checkpoint does not match the space or action set".into()));
            }
            if st.models.len() != classes.len() {
                return Err(GrmError::Resume("checkpoint lacks a reward model per class".into()));
            }
            st
        }
        None => {
            let jobs: Vec<(usize, usize)> =
                (0..classes.len()).flat_map(|ci| (0..cfg.num_samples_phase1).map(move |k| (ci, k))).collect();
            let results = exec.map(&jobs, |_, &(ci, k)| -> Result<(usize, TrialRecord), GrmError> {
                let sampled = sample_random(&local[ci], seed::derive(seed, &[PHASE1, ci as u64, k as u64, 0]));
                let a = actions.nearest(&local[ci], &sampled)?;
                let config = actions.get(a).expect("nearest is in range");
                let trial_seed = seed::derive(seed, &[PHASE1, ci as u64, k as u64, 1]);
                run_trial(trainer, &classes[ci], config, FidelityLevel::full(cfg.full_epochs), trial_seed)
                    .map(|r| (a, r))
                    .map_err(|source| GrmError::SampleTrial { class: classes[ci].name().to_string(), sample: k, source })
            });
            let mut per_class: Vec<Vec<TrialRecord>> = vec![Vec::new(); classes.len()];
            let (mut epochs, mut cost) = (0u64, 0.0);
            for (&(ci, k), res) in jobs.iter().zip(results) {
                let (action, rec) = res?;
                let features = extract_dynamics_features(&rec.log.truncated(partial))?;
                let ev = GrmEvent::Sample {
                    class: rec.arch.clone(),
                    sample: k,
                    action,
                    config: rec.config.clone(),
                    features,
                    performance: rec.final_performance.expect("full-fidelity trial"),
                    epochs: rec.log.completed(),
                    cost: rec.cost(),
                };
                observer.event(&ev)?;
                audit.push(ev);
                epochs += rec.log.completed() as u64;
                cost += rec.cost();
                per_class[ci].push(rec);
            }
            let models = per_class
                .iter()
                .map(|trials| estimate_reward_model(trials, Some(partial), cfg.ridge_lambda))
                .collect::<Result<Vec<_>, _>>()?;
            let st = GrmState {
                models,
                q: QTable::new(classes, actions.len()),
                next_episode: 0,
                phase1_epochs: epochs,
                phase2_epochs: 0,
                phase1_cost: cost,
                phase2_cost: 0.0,
            };
            observer.checkpoint(&st)?;
            st
        }
    };

    for e in state.next_episode..cfg.max_episodes {
        let ci = e % classes.len();
        let class = &classes[ci];
        let epsilon = cfg.epsilon(e);
        let mut rng = seed::rng_for(seed, &[PHASE2, e as u64, 0]);
        let (action, explored) = choose(&state.q, class, epsilon, &mut rng)?;
        let config = actions.get(action).expect("chosen in range");
        let rec = run_trial(trainer, class, config, FidelityLevel::partial(partial), seed::derive(seed, &[PHASE2, e as u64, 1]))
            .map_err(|source| GrmError::EpisodeTrial { episode: e, source })?;
        let features = extract_dynamics_features(&rec.log)?;
        let mut reward = predict_performance(&state.models[ci], &features)?;
        if cfg.clip_reward {
            reward = reward.clamp(0.0, 1.0);
        }
        let q = q_update(&mut state.q, class, action, reward, cfg.alpha)?;
        state.next_episode = e + 1;
        state.phase2_epochs += rec.log.completed() as u64;
        state.phase2_cost += rec.cost();
        let ev = GrmEvent::Episode {
            episode: e,
            class: class.clone(),
            action,
            config: config.clone(),
            epsilon,
            explored,
            features,
            reward,
            q,
            epochs: rec.log.completed(),
            cost: rec.cost(),
        };
        observer.event(&ev)?;
        observer.checkpoint(&state)?;
        audit.push(ev);
    }

    Ok(GrmOutcome { policy: state.q.policy()?, state, audit })
}
