//! Closed-form learning-curve simulator.
//!
//! For encoded configuration `x` of class `c`:
//!
//! ```text
//! L_inf(x) = base_c + sum_i w_i (x_i - x*_i)^2
//! P(x)     = clamp(1 - L_inf(x), 0, 1)
//! r(x)     = rate_base + rate_gain * P(x)
//! L(t)     = L_inf + (L0 - L_inf) exp(-r tau_t) + noise
//! ```
//!
//! `tau_t` is the cumulative effective data seen after epoch `t` (one per
//! full-data epoch), so reduced data fractions and narrow curriculum stages
//! slow convergence. Per-epoch noise has standard deviation
//! `noise / sqrt(f_t)` for effective fraction `f_t`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    run_trial_with_curriculum, EpochRecord, FidelityLevel, Trainer, TrainerOutput, TrialError, TrialRecord,
    TrialRequest,
};
use crate::curriculum::CurriculumSchedule;
use crate::seed;
use crate::space::{decode_unit_cube, encode_unit_cube, encoded_dim, ArchitectureClass, Configuration, SearchSpace};

/// Curve parameters of one architecture class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    /// Configuration minimizing the asymptotic loss.
    pub target: Configuration,
    pub base_loss: f64,
    /// One weight per encoded coordinate.
    pub weights: Vec<f64>,
    pub init_loss: f64,
    pub rate_base: f64,
    pub rate_gain: f64,
    pub noise: f64,
    /// Batch-loss variance is `variance_scale * L(t) * exp(variance_noise * z)`.
    pub variance_scale: f64,
    #[serde(default)]
    pub variance_noise: f64,
}

impl CurveModel {
    /// Unit-weight bowl around `target` with zero floor and noiseless curves.
    pub fn bowl(space: &SearchSpace, target: Configuration) -> Result<Self, BenchmarkError> {
        let dim = encoded_dim(space);
        let x = encode_unit_cube(space, &target).map_err(|e| BenchmarkError::Target(e.to_string()))?;
        let worst: f64 = x.iter().map(|t| t.max(1.0 - t).powi(2)).sum();
        Ok(Self {
            target,
            base_loss: 0.0,
            weights: vec![1.0; dim],
            init_loss: worst + 0.5,
            rate_base: 0.05,
            rate_gain: 0.25,
            noise: 0.0,
            variance_scale: 0.05,
            variance_noise: 0.0,
        })
    }
}

/// Extra penalty on final performance for curriculum choices. With the
/// default weights of 0 curricula only change cost and convergence speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurriculumEffect {
    /// Penalty per unit of condition coverage missing in the last stage.
    #[serde(default)]
    pub coverage_weight: f64,
    /// Penalty per unit of `|warmup - target_warmup| / total_epochs`.
    #[serde(default)]
    pub warmup_weight: f64,
    /// Preferred warm-up length as a fraction of the total epochs.
    #[serde(default)]
    pub target_warmup: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error("no curve model for class {0:?}")]
    MissingClass(String),
    #[error("curve model for unknown class {0:?}")]
    UnknownClass(String),
    #[error("curve target is invalid: {0}")]
    Target(String),
    #[error("class {class:?} has {found} weights, its space encodes to {expected}")]
    Weights { class: String, expected: usize, found: usize },
    #[error("class {class:?}: {reason}")]
    Curve { class: String, reason: String },
    #[error("full epoch budget must be at least 1")]
    NoEpochs,
}

/// Analytic argmax of the performance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptimum {
    pub class: ArchitectureClass,
    pub config: Configuration,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBenchmark", into = "RawBenchmark")]
pub struct SyntheticBenchmark {
    space: SearchSpace,
    full_epochs: u32,
    curves: BTreeMap<ArchitectureClass, CurveModel>,
    curriculum: CurriculumEffect,
    optimum: BenchmarkOptimum,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawBenchmark {
    space: SearchSpace,
    full_epochs: u32,
    curves: BTreeMap<ArchitectureClass, CurveModel>,
    #[serde(default)]
    curriculum: CurriculumEffect,
}

impl TryFrom<RawBenchmark> for SyntheticBenchmark {
    type Error = BenchmarkError;

    fn try_from(r: RawBenchmark) -> Result<Self, BenchmarkError> {
        SyntheticBenchmark::new(r.space, r.full_epochs, r.curves, r.curriculum)
    }
}

impl From<SyntheticBenchmark> for RawBenchmark {
    fn from(b: SyntheticBenchmark) -> Self {
        RawBenchmark { space: b.space, full_epochs: b.full_epochs, curves: b.curves, curriculum: b.curriculum }
    }
}

impl SyntheticBenchmark {
    pub fn new(
        space: SearchSpace,
        full_epochs: u32,
        curves: BTreeMap<ArchitectureClass, CurveModel>,
        curriculum: CurriculumEffect,
    ) -> Result<Self, BenchmarkError> {
        if full_epochs == 0 {
            return Err(BenchmarkError::NoEpochs);
        }
        if let Some(c) = curves.keys().find(|c| !space.classes().contains(c)) {
            return Err(BenchmarkError::UnknownClass(c.name().to_string()));
        }
        let mut best: Option<BenchmarkOptimum> = None;
        for class in space.classes() {
            let m = curves.get(class).ok_or_else(|| BenchmarkError::MissingClass(class.name().to_string()))?;
            let local = space.for_class(class);
            let expected = encoded_dim(&local);
            if m.weights.len() != expected {
                return Err(BenchmarkError::Weights {
                    class: class.name().to_string(),
                    expected,
                    found: m.weights.len(),
                });
            }
            encode_unit_cube(&local, &m.target).map_err(|e| BenchmarkError::Target(e.to_string()))?;
            let bad = |reason: &str| BenchmarkError::Curve { class: class.name().to_string(), reason: reason.into() };
            if m.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(bad("weights must be finite and non-negative"));
            }
            if !(m.rate_base > 0.0 && m.rate_gain >= 0.0 && m.rate_base.is_finite() && m.rate_gain.is_finite()) {
                return Err(bad("rate_base must be positive and rate_gain non-negative"));
            }
            for (v, what) in [
                (m.base_loss, "base_loss"),
                (m.init_loss, "init_loss"),
                (m.noise, "noise"),
                (m.variance_scale, "variance_scale"),
                (m.variance_noise, "variance_noise"),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(&format!("{what} must be finite and non-negative")));
                }
            }
            let value = (1.0 - m.base_loss).clamp(0.0, 1.0);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(BenchmarkOptimum { class: class.clone(), config: m.target.clone(), value });
            }
        }
        let optimum = best.expect("space has at least one class");
        Ok(Self { space, full_epochs, curves, curriculum, optimum })
    }

    /// Single shared bowl: every class gets a unit-weight bowl centred at the
    /// configuration decoded from the all-0.5 encoding, so the optimum value
    /// is 1.
    pub fn quadratic_bowl(space: SearchSpace, full_epochs: u32) -> Result<Self, BenchmarkError> {
        let mut curves = BTreeMap::new();
        for class in space.classes() {
            let local = space.for_class(class);
            let centre = decode_unit_cube(&local, &vec![0.5; encoded_dim(&local)])
                .map_err(|e| BenchmarkError::Target(e.to_string()))?;
            curves.insert(class.clone(), CurveModel::bowl(&local, centre)?);
        }
        Self::new(space, full_epochs, curves, CurriculumEffect::default())
    }

    /// A generic benchmark for an arbitrary space: per-class targets drawn
    /// from `seed`, floors rising by 0.05 per class, weights scaled so the
    /// worst asymptotic loss stays near 1.
    pub fn seeded(space: SearchSpace, full_epochs: u32, noise: f64, seed: u64) -> Result<Self, BenchmarkError> {
        let mut curves = BTreeMap::new();
        for (i, class) in space.classes().iter().enumerate() {
            let local = space.for_class(class);
            let target = crate::space::sample_random(&local, seed::derive(seed, &[i as u64]));
            let mut m = CurveModel::bowl(&local, target)?;
            let worst = m.init_loss - 0.5;
            let scale = if worst > 0.0 { 0.9 / worst } else { 1.0 };
            m.weights.iter_mut().for_each(|w| *w = scale);
            m.base_loss = 0.05 * (i + 1) as f64;
            m.init_loss = m.base_loss + 1.5;
            m.noise = noise;
            m.variance_noise = if noise > 0.0 { 0.1 } else { 0.0 };
            curves.insert(class.clone(), m);
        }
        Self::new(space, full_epochs, curves, CurriculumEffect::default())
    }

    pub fn with_curriculum_effect(mut self, effect: CurriculumEffect) -> Self {
        self.curriculum = effect;
        self
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn full_epochs(&self) -> u32 {
        self.full_epochs
    }

    pub fn curve(&self, class: &ArchitectureClass) -> Option<&CurveModel> {
        self.curves.get(class)
    }

    pub fn curriculum_effect(&self) -> CurriculumEffect {
        self.curriculum
    }

    pub fn optimum(&self) -> &BenchmarkOptimum {
        &self.optimum
    }

    fn model(&self, class: &ArchitectureClass) -> Result<(&CurveModel, SearchSpace), TrialError> {
        let m = self
            .curves
            .get(class)
            .ok_or_else(|| TrialError::Rejected(format!("unknown architecture class {:?}", class.name())))?;
        Ok((m, self.space.for_class(class)))
    }

    /// Noise-free asymptotic loss of `config`.
    pub fn asymptotic_loss(&self, class: &ArchitectureClass, config: &Configuration) -> Result<f64, TrialError> {
        let (m, local) = self.model(class)?;
        let x = encode_unit_cube(&local, &local.normalize(config)).map_err(|e| TrialError::Rejected(e.to_string()))?;
        let t = encode_unit_cube(&local, &m.target).expect("target checked at construction");
        Ok(m.base_loss + x.iter().zip(&t).zip(&m.weights).map(|((a, b), w)| w * (a - b) * (a - b)).sum::<f64>())
    }

    /// Noise-free final performance, `clamp(1 - L_inf)`, before any
    /// curriculum penalty.
    pub fn true_performance(&self, class: &ArchitectureClass, config: &Configuration) -> Result<f64, TrialError> {
        Ok((1.0 - self.asymptotic_loss(class, config)?).clamp(0.0, 1.0))
    }

    /// Penalty subtracted from final performance when training follows
    /// `curriculum` over `total_epochs`.
    pub fn curriculum_penalty(&self, curriculum: &CurriculumSchedule, total_epochs: u32) -> f64 {
        let e = &self.curriculum;
        let total = total_epochs.max(1) as f64;
        let target = (e.target_warmup * total).round();
        e.coverage_weight * (1.0 - curriculum.final_conditions().coverage())
            + e.warmup_weight * (curriculum.warmup_epochs() as f64 - target).abs() / total
    }

    /// Noise-free loss after each of `epochs` epochs.
    pub fn mean_curve(
        &self,
        class: &ArchitectureClass,
        config: &Configuration,
        data_fraction: f64,
        curriculum: Option<&CurriculumSchedule>,
        epochs: u32,
    ) -> Result<Vec<f64>, TrialError> {
        let (m, _) = self.model(class)?;
        let l_inf = self.asymptotic_loss(class, config)?;
        let rate = m.rate_base + m.rate_gain * (1.0 - l_inf).clamp(0.0, 1.0);
        let mut tau = 0.0;
        Ok((1..=epochs)
            .map(|t| {
                tau += effective_fraction(data_fraction, curriculum, t);
                l_inf + (m.init_loss - l_inf) * (-rate * tau).exp()
            })
            .collect())
    }
}

fn effective_fraction(data_fraction: f64, curriculum: Option<&CurriculumSchedule>, epoch: u32) -> f64 {
    data_fraction * curriculum.map_or(1.0, |c| c.active_at(epoch).coverage())
}

impl Trainer for SyntheticBenchmark {
    fn train(&self, req: &TrialRequest) -> Result<TrainerOutput, TrialError> {
        let (m, _) = self.model(&req.architecture)?;
        let curriculum = req.curriculum.as_ref();
        let mean = self.mean_curve(&req.architecture, &req.assignments, req.data_fraction, curriculum, req.epoch_budget)?;
        let mut rng = seed::rng(req.seed);
        let epochs = mean
            .iter()
            .enumerate()
            .map(|(i, clean)| {
                let t = i as u32 + 1;
                let f = effective_fraction(req.data_fraction, curriculum, t);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let loss = (clean + m.noise / f.sqrt() * z1).max(0.0);
                EpochRecord {
                    epoch: t,
                    train_loss: loss,
                    batch_loss_variance: m.variance_scale * loss * (m.variance_noise * z2).exp(),
                    val_metric: Some((1.0 - loss).clamp(0.0, 1.0)),
                }
            })
            .collect();
        let final_performance = if req.full_fidelity {
            let p = self.true_performance(&req.architecture, &req.assignments)?;
            let penalty = curriculum.map_or(0.0, |c| self.curriculum_penalty(c, req.epoch_budget));
            Some((p - penalty).clamp(0.0, 1.0))
        } else {
            None
        };
        Ok(TrainerOutput { epochs, final_performance })
    }
}

/// In-process trial against the benchmark.
pub fn simulate_training(
    bench: &SyntheticBenchmark,
    arch: &ArchitectureClass,
    config: &Configuration,
    fidelity: FidelityLevel,
    curriculum: Option<&CurriculumSchedule>,
    seed: u64,
) -> Result<TrialRecord, TrialError> {
    run_trial_with_curriculum(bench, arch, config, fidelity, curriculum, seed)
}

pub fn benchmark_optimum(bench: &SyntheticBenchmark) -> (Configuration, f64) {
    (bench.optimum.config.clone(), bench.optimum.value)
}
