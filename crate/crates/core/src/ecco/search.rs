use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operators::{crossover_genomes, mutate_genome, random_genome, tournament_select, MutationRates};
use super::{evaluate_fitness, EccoError, Fitness, Genome};
use crate::history::SearchObserver;
use crate::parallel::Executor;
use crate::seed;
use crate::space::SearchSpace;
use crate::trainer::Trainer;

const INIT: u64 = 1;
const BREED: u64 = 2;
const EVAL: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccoConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Weight of normalized cost in the scalar fitness.
    pub lambda: f64,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// SBX distribution index; larger keeps children closer to parents.
    pub sbx_eta: f64,
    pub mutation: MutationRates,
    pub full_epochs: u32,
    pub max_failures: usize,
}

impl Default for EccoConfig {
    fn default() -> Self {
        Self {
            pop_size: 16,
            generations: 30,
            lambda: 0.1,
            tournament_k: 3,
            crossover_rate: 0.9,
            sbx_eta: 15.0,
            mutation: MutationRates::default(),
            full_epochs: 100,
            max_failures: 5,
        }
    }
}

impl EccoConfig {
    pub fn validate(&self) -> Result<(), EccoError> {
        let bad = |m: &str| Err(EccoError::InvalidConfig(m.into()));
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if self.tournament_k == 0 {
            return bad("tournament_k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate must lie in [0, 1]");
        }
        if !(self.sbx_eta.is_finite() && self.sbx_eta > 0.0) {
            return bad("sbx_eta must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and non-negative");
        }
        if self.full_epochs < 2 {
            return bad("full_epochs must be at least 2 so a curriculum fits");
        }
        self.mutation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Fitness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best: f64,
    /// Mean scalar over individuals whose trial succeeded.
    pub mean: f64,
    pub evaluations: usize,
}

/// One fitness evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccoEvent {
    pub generation: usize,
    pub index: usize,
    pub genome: Genome,
    pub fitness: Fitness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccoState {
    /// Generations bred and evaluated after the initial population.
    pub generation: usize,
    pub population: Vec<Individual>,
    pub best: Individual,
    pub history: Vec<GenerationSummary>,
    pub failures: usize,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct EccoOutcome {
    pub best: Individual,
    /// One entry per bred generation.
    pub history: Vec<GenerationSummary>,
    pub state: EccoState,
}

fn best_index(pop: &[Individual]) -> usize {
    let mut b = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness.scalar > pop[b].fitness.scalar {
            b = i;
        }
    }
    b
}

fn summarize(generation: usize, pop: &[Individual], evaluations: usize) -> GenerationSummary {
    let ok: Vec<f64> = pop.iter().filter(|i| !i.fitness.failed).map(|i| i.fitness.scalar).collect();
    let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
    GenerationSummary { generation, best: pop[best_index(pop)].fitness.scalar, mean, evaluations }
}

/// One generation of offspring, not counting the elite: pairs of
/// tournament winners, crossed over with probability `crossover_rate`, then
/// each child mutated. Random draws happen in exactly that order.
fn breed(
    space: &SearchSpace,
    pop: &[Individual],
    cfg: &EccoConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Genome>, EccoError> {
    let scores: Vec<f64> = pop.iter().map(|i| i.fitness.scalar).collect();
    let need = cfg.pop_size - 1;
    let mut out = Vec::with_capacity(need);
    while out.len() < need {
        let i = tournament_select(&scores, cfg.tournament_k, rng)?;
        let j = tournament_select(&scores, cfg.tournament_k, rng)?;
        let (a, b) = (&pop[i].genome, &pop[j].genome);
        let (c1, c2) = if rng.random::<f64>() < cfg.crossover_rate {
            crossover_genomes(space, a, b, cfg.sbx_eta, cfg.full_epochs, rng)?
        } else {
            (a.clone(), b.clone())
        };
        out.push(mutate_genome(&c1, &cfg.mutation, space, cfg.full_epochs, rng)?);
        if out.len() < need {
            out.push(mutate_genome(&c2, &cfg.mutation, space, cfg.full_epochs, rng)?);
        }
    }
    Ok(out)
}

/// Evaluates genomes in parallel and merges in index order. Returns the
/// individuals and the first error past the failure cap, if any.
#[allow(clippy::too_many_arguments)]
fn evaluate_all(
    genomes: Vec<Genome>,
    first_index: usize,
    generation: usize,
    trainer: &dyn Trainer,
    cfg: &EccoConfig,
    seed: u64,
    state_failures: &mut usize,
    state_cost: &mut f64,
    exec: &Executor,
    observer: &mut dyn SearchObserver<EccoEvent, EccoState>,
) -> Result<(Vec<Individual>, Option<crate::trainer::TrialError>), EccoError> {
    let evals = exec.map(&genomes, |k, g| {
        let s = seed::derive(seed, &[EVAL, generation as u64, (first_index + k) as u64]);
        evaluate_fitness(g, trainer, cfg.lambda, cfg.full_epochs, s)
    });
    let mut out = Vec::with_capacity(genomes.len());
    let mut fatal = None;
    for (k, (genome, ev)) in genomes.into_iter().zip(evals).enumerate() {
        *state_cost += ev.fitness.cost;
        observer.event(&EccoEvent {
            generation,
            index: first_index + k,
            genome: genome.clone(),
            fitness: ev.fitness,
            error: ev.error.as_ref().map(|e| e.to_string()),
        })?;
        if let Some(e) = ev.error {
            *state_failures += 1;
            if *state_failures > cfg.max_failures && fatal.is_none() {
                fatal = Some(e);
            }
        }
        out.push(Individual { genome, fitness: ev.fitness });
    }
    Ok((out, fatal))
}

/// Runs the GA: a random initial population, then `generations` rounds of
/// elitism (the best individual carries over with its fitness), tournament
/// selection, crossover and mutation. State is checkpointed after the
/// initial population and after each generation.
pub fn ecco_search(
    space: &SearchSpace,
    trainer: &dyn Trainer,
    cfg: &EccoConfig,
    seed: u64,
    resume: Option<EccoState>,
    exec: &Executor,
    observer: &mut dyn SearchObserver<EccoEvent, EccoState>,
) -> Result<EccoOutcome, EccoError> {
    cfg.validate()?;
    let mut state = match resume {
        Some(st) => {
            if st.population.len() != cfg.pop_size {
                return Err(EccoError::Resume("checkpoint population size differs from pop_size".into()));
            }
            for ind in &st.population {
                ind.genome.validate(space, cfg.full_epochs).map_err(|e| EccoError::Resume(e.to_string()))?;
            }
            st
        }
        None => {
            let mut rng = seed::rng_for(seed, &[INIT]);
            let genomes: Vec<Genome> = (0..cfg.pop_size).map(|_| random_genome(space, cfg.full_epochs, &mut rng)).collect();
            let (mut failures, mut cost) = (0, 0.0);
            let (population, fatal) =
                evaluate_all(genomes, 0, 0, trainer, cfg, seed, &mut failures, &mut cost, exec, observer)?;
            let best = population[best_index(&population)].clone();
            let st = EccoState { generation: 0, population, best, history: Vec::new(), failures, cost };
            observer.checkpoint(&st)?;
            if let Some(last) = fatal {
                return Err(EccoError::TooManyFailures { failures: st.failures, last });
            }
            st
        }
    };

    while state.generation < cfg.generations {
        let g = state.generation + 1;
        let mut rng = seed::rng_for(seed, &[BREED, g as u64]);
        let elite = state.population[best_index(&state.population)].clone();
        let children = breed(space, &state.population, cfg, &mut rng)?;
        let (evaluated, fatal) = evaluate_all(
            children,
            1,
            g,
            trainer,
            cfg,
            seed,
            &mut state.failures,
            &mut state.cost,
            exec,
            observer,
        )?;
        let mut population = Vec::with_capacity(cfg.pop_size);
        population.push(elite);
        population.extend(evaluated);
        let summary = summarize(g, &population, cfg.pop_size - 1);
        let top = &population[best_index(&population)];
        if top.fitness.scalar > state.best.fitness.scalar {
            state.best = top.clone();
        }
        state.population = population;
        state.history.push(summary);
        state.generation = g;
        observer.checkpoint(&state)?;
        if let Some(last) = fatal {
            return Err(EccoError::TooManyFailures { failures: state.failures, last });
        }
    }

    Ok(EccoOutcome { best: state.best.clone(), history: state.history.clone(), state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{MemoryObserver, NoopObserver};
    use crate::space::ParameterSpec;
    use crate::trainer::SyntheticBenchmark;

    fn bench() -> SyntheticBenchmark {
        let space = SearchSpace::new(
            vec!["net".into()],
            vec![ParameterSpec::continuous("a", 0.0, 1.0), ParameterSpec::categorical("opt", ["adam", "sgd"])],
        )
        .unwrap();
        SyntheticBenchmark::quadratic_bowl(space, 20).unwrap()
    }

    fn cfg() -> EccoConfig {
        EccoConfig { pop_size: 6, generations: 5, full_epochs: 20, ..EccoConfig::default() }
    }

    #[test]
    fn zero_generations_is_best_of_initial() {
        let b = bench();
        let c = EccoConfig { generations: 0, ..cfg() };
        let mut obs = MemoryObserver::default();
        let out = ecco_search(b.space(), &b, &c, 1, None, &Executor::new(1), &mut obs).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(obs.events.len(), 6);
        let best = obs.events.iter().map(|e| e.fitness.scalar).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best.fitness.scalar, best);
    }

    #[test]
    fn elitism_keeps_best_non_decreasing() {
        let b = bench();
        let out = ecco_search(b.space(), &b, &cfg(), 2, None, &Executor::new(1), &mut NoopObserver).unwrap();
        assert_eq!(out.history.len(), 5);
        for w in out.history.windows(2) {
            assert!(w[1].best >= w[0].best);
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let b = bench();
        let ex = Executor::new(1);
        let mut obs = MemoryObserver::default();
        let full = ecco_search(b.space(), &b, &cfg(), 3, None, &ex, &mut obs).unwrap();
        let mid = obs.checkpoints[2].clone();
        let resumed = ecco_search(b.space(), &b, &cfg(), 3, Some(mid), &ex, &mut NoopObserver).unwrap();
        assert_eq!(resumed.state, full.state);
    }
}
