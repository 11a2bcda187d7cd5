//! Evolutionary co-optimization of hyperparameters and a data curriculum.
//!
//! A genome pairs a configuration (with its architecture class) with a
//! staged schedule of which walking conditions the trainer may use from which
//! epoch on. Fitness trades final performance against measured training
//! cost; a generational GA with elitism and tournament selection evolves both
//! halves together.

mod operators;
mod search;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use operators::{
    crossover_genomes, crossover_hyperparams, curriculum_crossover, mutate_genome, random_curriculum, random_genome,
    sbx_beta, sbx_children, sbx_crossover, sbx_with, tournament_select, uniform_crossover, MutationRates,
};
pub use search::{ecco_search, EccoConfig, EccoEvent, EccoOutcome, EccoState, GenerationSummary, Individual};

use crate::curriculum::{CurriculumError, CurriculumSchedule};
use crate::space::{ArchitectureClass, Configuration, SearchSpace, SpaceError};
use crate::trainer::{run_trial_with_curriculum, trial_cost, FidelityLevel, Trainer, TrialError};

/// Scalar fitness of an individual whose trial failed. Below any real score.
pub const FAILED_FITNESS: f64 = -1e12;

#[derive(Debug, Error)]
pub enum EccoError {
    #[error("invalid ECCO settings: {0}")]
    InvalidConfig(String),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("genome names unknown class {0:?}")]
    UnknownClass(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error("{failures} trials failed, more than the cap allows; last error")]
    TooManyFailures {
        failures: usize,
        #[source]
        last: TrialError,
    },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("failed to persist progress: {0}")]
    Persist(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub class: ArchitectureClass,
    pub hyperparams: Configuration,
    pub curriculum: CurriculumSchedule,
}

impl Genome {
    pub fn validate(&self, space: &SearchSpace, total_epochs: u32) -> Result<(), EccoError> {
        if !space.classes().contains(&self.class) {
            return Err(EccoError::UnknownClass(self.class.to_string()));
        }
        space.for_class(&self.class).check(&self.hyperparams)?;
        self.curriculum.validate(total_epochs)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub performance: f64,
    /// Training cost in full-data epoch units.
    pub cost: f64,
    pub scalar: f64,
    /// The trial failed and `scalar` is [`FAILED_FITNESS`].
    #[serde(default)]
    pub failed: bool,
}

impl Fitness {
    /// `performance - lambda * cost / reference_cost`.
    pub fn new(performance: f64, cost: f64, lambda: f64, reference_cost: f64) -> Self {
        Self { performance, cost, scalar: performance - lambda * cost / reference_cost, failed: false }
    }

    pub fn failed(cost: f64) -> Self {
        Self { performance: 0.0, cost, scalar: FAILED_FITNESS, failed: true }
    }
}

/// Cost of a full-data trial of `full_epochs` epochs, the unit that costs are
/// normalized by.
pub fn reference_cost(full_epochs: u32) -> f64 {
    trial_cost(1.0, None, full_epochs)
}

#[derive(Debug)]
pub struct Evaluation {
    pub fitness: Fitness,
    pub error: Option<TrialError>,
}

/// Trains `g` at full fidelity under its curriculum. A failed trial yields a
/// flagged sentinel fitness rather than an error.
pub fn evaluate_fitness(g: &Genome, trainer: &dyn Trainer, lambda: f64, full_epochs: u32, seed: u64) -> Evaluation {
    let res = run_trial_with_curriculum(
        trainer,
        &g.class,
        &g.hyperparams,
        FidelityLevel::full(full_epochs),
        Some(&g.curriculum),
        seed,
    );
    match res {
        Ok(rec) => {
            let p = rec.final_performance.expect("completed full-fidelity trial");
            Evaluation { fitness: Fitness::new(p, rec.cost(), lambda, reference_cost(full_epochs)), error: None }
        }
        Err(e) => {
            let cost = e.partial_log().map_or(0.0, |l| trial_cost(1.0, Some(&g.curriculum), l.completed()));
            Evaluation { fitness: Fitness::failed(cost), error: Some(e) }
        }
    }
}
