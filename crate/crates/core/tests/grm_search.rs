use std::collections::BTreeMap;

use stepsearch_core::grm::{grm_search, GrmConfig};
use stepsearch_core::history::{MemoryObserver, NoopObserver};
use stepsearch_core::parallel::Executor;
use stepsearch_core::space::{discretize, ArchitectureClass, ParameterSpec, SearchSpace};
use stepsearch_core::trainer::{CurriculumEffect, CurveModel, SyntheticBenchmark};

fn planted(noise: f64) -> (SyntheticBenchmark, stepsearch_core::space::ActionSet) {
    let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap();
    let actions = discretize(&space, 8, 0).unwrap();
    let target = actions.get(3).unwrap().clone();
    let mut m = CurveModel::bowl(&space, target).unwrap();
    m.base_loss = 0.1;
    m.weights = vec![2.0];
    m.init_loss = 2.5;
    m.noise = noise;
    m.variance_noise = 0.1;
    let curves = BTreeMap::from([(ArchitectureClass::new("c"), m)]);
    (SyntheticBenchmark::new(space, 1000, curves, CurriculumEffect::default()).unwrap(), actions)
}

fn cfg() -> GrmConfig {
    GrmConfig { full_epochs: 1000, partial_epochs: Some(10), ..GrmConfig::default() }
}

#[test]
fn planted_action_is_found_cheaply() {
    let (bench, actions) = planted(0.02);
    let cfg = cfg();
    let mut hits = 0;
    for s in 0..10 {
        let out = grm_search(bench.space(), &actions, &bench, &cfg, s, None, &Executor::new(1), &mut NoopObserver).unwrap();
        hits += usize::from(out.policy[&ArchitectureClass::new("c")] == 3);
        assert_eq!(out.state.phase2_epochs, 200 * 10);
        // Phase-2 training stays within a quarter of training every action fully.
        assert!(out.state.phase2_epochs as f64 <= 0.25 * actions.len() as f64 * 1000.0);
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let (bench, actions) = planted(0.02);
    let cfg = GrmConfig { max_episodes: 40, ..cfg() };
    let ex = Executor::new(1);
    let mut obs = MemoryObserver::default();
    let full = grm_search(bench.space(), &actions, &bench, &cfg, 4, None, &ex, &mut obs).unwrap();
    let mid = obs.checkpoints[obs.checkpoints.len() / 2].clone();
    let resumed = grm_search(bench.space(), &actions, &bench, &cfg, 4, Some(mid), &ex, &mut NoopObserver).unwrap();
    assert_eq!(resumed.state, full.state);
    assert_eq!(resumed.policy, full.policy);
}

#[test]
fn worker_count_does_not_change_the_run() {
    let (bench, actions) = planted(0.02);
    let cfg = GrmConfig { max_episodes: 30, ..cfg() };
    let run = |w| grm_search(bench.space(), &actions, &bench, &cfg, 2, None, &Executor::new(w), &mut NoopObserver).unwrap();
    let (a, b) = (run(1), run(4));
    assert_eq!(a.state, b.state);
    assert_eq!(a.audit, b.audit);
}
