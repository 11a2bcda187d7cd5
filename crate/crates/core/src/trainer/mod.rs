//! Trial execution.
//!
//! A [`Trainer`] turns a [`TrialRequest`] into per-epoch telemetry. Two
//! implementations ship with the crate: [`SyntheticBenchmark`] runs a
//! closed-form learning-curve model in process, and [`ProcessTrainer`] drives
//! an external trainer over the line-delimited JSON protocol in [`protocol`].
//! [`run_trial`] validates whatever the trainer returns and packages it as a
//! [`TrialRecord`].

mod features;
mod process;
pub mod protocol;
mod synthetic;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::CurriculumSchedule;
use crate::space::{ArchitectureClass, Configuration};

pub use features::{extract_dynamics_features, DynamicsFeatures, FeatureError, FEATURE_DIM};
pub use process::{ProcessTrainer, DEFAULT_TRIAL_TIMEOUT};
pub use synthetic::{
    benchmark_optimum, simulate_training, BenchmarkError, BenchmarkOptimum, CurriculumEffect, CurveModel,
    SyntheticBenchmark,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub batch_loss_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_metric: Option<f64>,
}

/// Per-epoch telemetry of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub budget: u32,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("epoch indices must strictly increase within 1..=budget (record {0})")]
    BadIndex(usize),
    #[error("record {0} has a negative or non-finite loss")]
    BadLoss(usize),
    #[error("record {0} has a negative or non-finite batch-loss variance")]
    BadVariance(usize),
    #[error("log holds {completed} epochs but the budget is {budget}")]
    OverBudget { completed: usize, budget: u32 },
}

impl TrainingLog {
    pub fn new(budget: u32, epochs: Vec<EpochRecord>) -> Result<Self, LogError> {
        let log = Self { budget, epochs };
        log.validate()?;
        Ok(log)
    }

    pub fn validate(&self) -> Result<(), LogError> {
        if self.epochs.len() > self.budget as usize {
            return Err(LogError::OverBudget { completed: self.epochs.len(), budget: self.budget });
        }
        let mut prev = 0;
        for (i, e) in self.epochs.iter().enumerate() {
            if e.epoch <= prev || e.epoch > self.budget {
                return Err(LogError::BadIndex(i));
            }
            prev = e.epoch;
            if !(e.train_loss.is_finite() && e.train_loss >= 0.0) {
                return Err(LogError::BadLoss(i));
            }
            if !(e.batch_loss_variance.is_finite() && e.batch_loss_variance >= 0.0) {
                return Err(LogError::BadVariance(i));
            }
        }
        Ok(())
    }

    pub fn completed(&self) -> u32 {
        self.epochs.len() as u32
    }

    /// The first `n` epochs, as if the trial had been given budget `n`.
    pub fn truncated(&self, n: u32) -> TrainingLog {
        TrainingLog { budget: n.min(self.budget), epochs: self.epochs.iter().take(n as usize).copied().collect() }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// One evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityLevel {
    pub epoch_budget: u32,
    pub data_fraction: f64,
    pub rung: usize,
    /// Whether this is the full-fidelity level, whose trials report the final
    /// validation performance.
    pub top: bool,
}

impl FidelityLevel {
    /// Full training: all data, `epochs` epochs.
    pub fn full(epochs: u32) -> Self {
        Self { epoch_budget: epochs, data_fraction: 1.0, rung: 0, top: true }
    }

    /// Reduced-epoch training on all data.
    pub fn partial(epochs: u32) -> Self {
        Self { epoch_budget: epochs, data_fraction: 1.0, rung: 0, top: false }
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        if self.epoch_budget == 0 {
            return Err(TrialError::InvalidRequest("epoch budget must be at least 1".into()));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(TrialError::InvalidRequest(format!(
                "data fraction {} is outside (0, 1]",
                self.data_fraction
            )));
        }
        Ok(())
    }
}

/// Message sent to a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRequest {
    pub architecture: ArchitectureClass,
    pub assignments: Configuration,
    pub epoch_budget: u32,
    pub data_fraction: f64,
    pub seed: u64,
    /// True when the trainer should report a final validation performance.
    #[serde(default)]
    pub full_fidelity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curriculum: Option<CurriculumSchedule>,
}

/// What a trainer hands back before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerOutput {
    pub epochs: Vec<EpochRecord>,
    pub final_performance: Option<f64>,
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("failed to launch trainer `{command}`: {source}")]
    Launch {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trainer protocol violation after {} epochs: {message}", .partial.completed())]
    Protocol { message: String, partial: TrainingLog },
    #[error("trainer timed out after {after:?} ({} epochs received)", .partial.completed())]
    Timeout { after: Duration, partial: TrainingLog },
    #[error("trainer exited with {status} after its terminal record")]
    Exit { status: String, partial: TrainingLog },
    #[error("trainer rejected the request: {0}")]
    Rejected(String),
    #[error("invalid trial request: {0}")]
    InvalidRequest(String),
}

impl TrialError {
    /// Epochs received before the failure, when any were.
    pub fn partial_log(&self) -> Option<&TrainingLog> {
        match self {
            TrialError::Protocol { partial, .. }
            | TrialError::Timeout { partial, .. }
            | TrialError::Exit { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Anything that can execute a trial. Implementations must be reentrant:
/// concurrent calls with different requests are allowed.
pub trait Trainer: Send + Sync {
    fn train(&self, request: &TrialRequest) -> Result<TrainerOutput, TrialError>;
}

impl<T: Trainer + ?Sized> Trainer for &T {
    fn train(&self, request: &TrialRequest) -> Result<TrainerOutput, TrialError> {
        (**self).train(request)
    }
}

impl<T: Trainer + ?Sized> Trainer for Box<T> {
    fn train(&self, request: &TrialRequest) -> Result<TrainerOutput, TrialError> {
        (**self).train(request)
    }
}

/// One (architecture, configuration, fidelity) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub arch: ArchitectureClass,
    pub config: Configuration,
    pub fidelity: FidelityLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curriculum: Option<CurriculumSchedule>,
    pub log: TrainingLog,
    /// Present iff the trial ran to completion at full fidelity.
    pub final_performance: Option<f64>,
}

impl TrialRecord {
    /// Training cost in full-data epoch equivalents: every completed epoch
    /// counts its data fraction times the share of conditions in use.
    pub fn cost(&self) -> f64 {
        trial_cost(self.fidelity.data_fraction, self.curriculum.as_ref(), self.log.completed())
    }

    /// Best available performance signal: the final performance at full
    /// fidelity, otherwise the last validation metric, otherwise one minus the
    /// last training loss (clamped to [0, 1]).
    pub fn observed_performance(&self) -> Option<f64> {
        if let Some(p) = self.final_performance {
            return Some(p);
        }
        let last = self.log.last()?;
        Some(last.val_metric.unwrap_or(1.0 - last.train_loss).clamp(0.0, 1.0))
    }
}

pub fn trial_cost(data_fraction: f64, curriculum: Option<&CurriculumSchedule>, completed: u32) -> f64 {
    (1..=completed)
        .map(|t| data_fraction * curriculum.map_or(1.0, |c| c.active_at(t).coverage()))
        .sum()
}

/// Runs one trial and validates the trainer's output.
pub fn run_trial(
    trainer: &dyn Trainer,
    arch: &ArchitectureClass,
    config: &Configuration,
    fidelity: FidelityLevel,
    seed: u64,
) -> Result<TrialRecord, TrialError> {
    run_trial_with_curriculum(trainer, arch, config, fidelity, None, seed)
}

/// [`run_trial`] with a data curriculum forwarded to the trainer.
pub fn run_trial_with_curriculum(
    trainer: &dyn Trainer,
    arch: &ArchitectureClass,
    config: &Configuration,
    fidelity: FidelityLevel,
    curriculum: Option<&CurriculumSchedule>,
    seed: u64,
) -> Result<TrialRecord, TrialError> {
    fidelity.validate()?;
    if let Some(c) = curriculum {
        c.validate(fidelity.epoch_budget).map_err(|e| TrialError::InvalidRequest(e.to_string()))?;
    }
    let request = TrialRequest {
        architecture: arch.clone(),
        assignments: config.clone(),
        epoch_budget: fidelity.epoch_budget,
        data_fraction: fidelity.data_fraction,
        seed,
        full_fidelity: fidelity.top,
        curriculum: curriculum.cloned(),
    };
    let out = trainer.train(&request)?;
    let log = check_output(&request, out.epochs)?;
    let completed = log.completed() == fidelity.epoch_budget;
    let final_performance = match (fidelity.top && completed, out.final_performance) {
        (true, Some(p)) if (0.0..=1.0).contains(&p) => Some(p),
        (true, Some(p)) => {
            return Err(TrialError::Protocol { message: format!("final performance {p} is outside [0, 1]"), partial: log })
        }
        (true, None) => {
            return Err(TrialError::Protocol {
                message: "full-fidelity trial finished without a final performance".into(),
                partial: log,
            })
        }
        (false, _) => None,
    };
    Ok(TrialRecord {
        arch: arch.clone(),
        config: config.clone(),
        fidelity,
        curriculum: curriculum.cloned(),
        log,
        final_performance,
    })
}

/// Epoch indices must run 1, 2, 3, ... without gaps and stay within budget.
fn check_output(request: &TrialRequest, epochs: Vec<EpochRecord>) -> Result<TrainingLog, TrialError> {
    let mut accepted = Vec::with_capacity(epochs.len());
    for (i, e) in epochs.into_iter().enumerate() {
        let expected = i as u32 + 1;
        let problem = if e.epoch != expected {
            Some(format!("expected epoch {expected}, got {}", e.epoch))
        } else if expected > request.epoch_budget {
            Some(format!("epoch {expected} exceeds the budget of {}", request.epoch_budget))
        } else if !(e.train_loss.is_finite() && e.train_loss >= 0.0) {
            Some(format!("epoch {expected} has invalid loss {}", e.train_loss))
        } else if !(e.batch_loss_variance.is_finite() && e.batch_loss_variance >= 0.0) {
            Some(format!("epoch {expected} has invalid batch-loss variance {}", e.batch_loss_variance))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(TrialError::Protocol {
                message,
                partial: TrainingLog { budget: request.epoch_budget, epochs: accepted },
            });
        }
        accepted.push(e);
    }
    Ok(TrainingLog { budget: request.epoch_budget, epochs: accepted })
}
