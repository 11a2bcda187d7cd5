//! Search engine for joint architecture and hyperparameter optimization.
//!
//! Three strategies share one search space, one trainer interface and one
//! history format:
//!
//! - [`grm`]: per-class linear reward models fitted on training dynamics,
//!   then an epsilon-greedy tabular search scored by those models;
//! - [`timfbo`]: a Gaussian-process surrogate over configuration and
//!   fidelity, warm-started from proxy observations, with cost-aware
//!   expected improvement and successive-halving promotion;
//! - [`ecco`]: a genetic algorithm over hyperparameters plus a staged data
//!   curriculum.
//!
//! Trials run through a [`trainer::Trainer`]: either the closed-form
//! [`trainer::SyntheticBenchmark`] or an external process.

pub mod curriculum;
pub mod seed;
pub mod space;
pub mod trainer;
pub mod grm;
pub mod history;
pub mod parallel;
pub mod timfbo;
pub mod ecco;
