//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any criterion fails or overruns its time budget.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use stepsearch_core::curriculum::{ConditionTag, Footwear, Speed};
use stepsearch_core::ecco::{ecco_search, sbx_beta, sbx_children, EccoConfig, MutationRates};
use stepsearch_core::grm::{estimate_reward_model, grm_search, predict_performance, GrmConfig};
use stepsearch_core::history::{MemoryObserver, NoopObserver};
use stepsearch_core::parallel::Executor;
use stepsearch_core::seed;
use stepsearch_core::space::{
    discretize, sample_random, ArchitectureClass, Configuration, ParameterSpec, SearchSpace,
};
use stepsearch_core::timfbo::{
    expected_improvement, promote_indices, surrogate_encoding, timfbo_search, GpSurrogate, Kernel, Observation,
    ProxyDataset, ProxyPoint, TimfboConfig,
};
use stepsearch_core::trainer::{
    extract_dynamics_features, CurriculumEffect, CurveModel, EpochRecord, FidelityLevel, SyntheticBenchmark,
    TrainingLog, TrialRecord,
};
use stepsearch_eval::{
    accuracy_from_rates, compute_eer, det_curve, evaluate, fmr100, parse_submission, Label, ProbeId, ScoreRecord,
    ScoreSet, SubmissionError, SubmissionFile, SUBMISSION_SCORES,
};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- scores

/// Published (FNMR, FMR, ACC, BACC) leaderboard rows, in percent.
const LEADERBOARD: [(f64, f64, f64, f64); 5] = [
    (10.0, 12.13, 88.51, 88.94),
    (9.73, 13.53, 87.61, 88.37),
    (8.87, 14.79, 86.99, 88.17),
    (11.00, 12.51, 87.94, 88.24),
    (11.27, 13.23, 87.36, 87.75),
];
const GENUINE: usize = 3000;
const IMPOSTOR: usize = 7000;

fn plain() -> ConditionTag {
    ConditionTag::new(Footwear::BF, Speed::W1)
}

fn from_scores(genuine: &[f64], impostor: &[f64]) -> ScoreSet {
    let rec = |k: usize, score: f64, label| ScoreRecord {
        probe_id: ProbeId(format!("p{k}")),
        claimed_id: "s".into(),
        score,
        label,
        condition: plain(),
        true_id: None,
    };
    let mut r: Vec<ScoreRecord> = genuine.iter().enumerate().map(|(k, &s)| rec(k, s, Label::Genuine)).collect();
    r.extend(impostor.iter().enumerate().map(|(k, &s)| rec(genuine.len() + k, s, Label::Impostor)));
    ScoreSet::new(r).expect("scores in range")
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn leaderboard_identities() -> Verdict {
    for (k, &(fnmr, fmr, acc, bacc)) in LEADERBOARD.iter().enumerate() {
        let (a, b) = accuracy_from_rates(fnmr, fmr, GENUINE, IMPOSTOR);
        ensure((round2(a) - acc).abs() <= 0.01 + 1e-9 && (round2(b) - bacc).abs() <= 0.01 + 1e-9, || {
            format!("row {}: rates give ACC {a:.4} BACC {b:.4}, published {acc} {bacc}", k + 1)
        })?;
        // The same row as an actual score file: nearest-integer error counts.
        let fnm = (fnmr / 100.0 * GENUINE as f64).round() as usize;
        let fm = (fmr / 100.0 * IMPOSTOR as f64).round() as usize;
        let g: Vec<f64> = (0..GENUINE).map(|i| if i < fnm { 0.2 } else { 0.8 }).collect();
        let i: Vec<f64> = (0..IMPOSTOR).map(|i| if i < fm { 0.8 } else { 0.2 }).collect();
        let m = evaluate(&from_scores(&g, &i), 0.5).map_err(e2s)?;
        ensure((round2(m.acc) - acc).abs() <= 0.01 + 1e-9 && (round2(m.bacc) - bacc).abs() <= 0.01 + 1e-9, || {
            format!("row {}: score file gives ACC {:.4} BACC {:.4}", k + 1, m.acc, m.bacc)
        })?;
    }
    Ok(format!("{} rows at {GENUINE}/{IMPOSTOR} claims", LEADERBOARD.len()))
}

/// Overlapping classes; every third set is quantized so ties occur.
fn random_set(rng: &mut impl Rng, n: usize) -> ScoreSet {
    let quantize = rng.random_range(0..3) == 0;
    let frac: f64 = rng.random_range(0.1..0.9);
    let ng = ((n as f64 * frac) as usize).clamp(1, n - 1);
    let shift: f64 = rng.random_range(0.0..0.4);
    let mut draw = |hi: bool| {
        let base: f64 = rng.random();
        let s = if hi { shift + (1.0 - shift) * base } else { (1.0 - shift) * base };
        if quantize {
            (s * 40.0).round() / 40.0
        } else {
            s
        }
    };
    let g: Vec<f64> = (0..ng).map(|_| draw(true)).collect();
    let i: Vec<f64> = (0..n - ng).map(|_| draw(false)).collect();
    from_scores(&g, &i)
}

/// Counts errors directly at every distinct score plus one threshold above
/// the maximum, then interpolates where FNMR first reaches FMR.
fn exhaustive_eer(s: &ScoreSet) -> f64 {
    let recs = s.records();
    let mut ts: Vec<f64> = recs.iter().map(|r| r.score).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(ts.last().unwrap().next_up());
    let g = recs.iter().filter(|r| r.label == Label::Genuine).count() as f64;
    let i = recs.len() as f64 - g;
    let mut prev = (f64::NAN, f64::NAN);
    for t in ts {
        let fm = recs.iter().filter(|r| r.label == Label::Impostor && r.score >= t).count() as f64;
        let fnm = recs.iter().filter(|r| r.label == Label::Genuine && r.score < t).count() as f64;
        let (fmr, fnmr) = (100.0 * fm / i, 100.0 * fnm / g);
        if fmr == fnmr {
            return fmr;
        }
        if fmr < fnmr {
            let (pm, pn) = prev;
            let a = (pm - pn) / ((pm - pn) - (fmr - fnmr));
            return pm + a * (fmr - pm);
        }
        prev = (fmr, fnmr);
    }
    unreachable!("the top threshold rejects everything")
}

fn det_is_monotone(s: &ScoreSet) -> bool {
    let d = det_curve(s).expect("two classes");
    d.windows(2).all(|w| w[1].threshold > w[0].threshold && w[1].fmr <= w[0].fmr && w[1].fnmr >= w[0].fnmr)
}

fn eer_oracle() -> Verdict {
    let mut rng = seed::rng(2);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = rng.random_range(50..=5000);
        let s = random_set(&mut rng, n);
        let e = compute_eer(&s).map_err(e2s)?.eer;
        let o = exhaustive_eer(&s);
        worst = worst.max((e - o).abs());
        ensure((e - o).abs() <= 1e-9, || format!("set {k} (n={n}): {e} vs oracle {o}"))?;
        ensure(det_is_monotone(&s), || format!("set {k}: DET not monotone"))?;
    }
    Ok(format!("200 sets, max |diff| {worst:.1e}"))
}

type Transform = Box<dyn Fn(f64) -> f64>;

fn transforms(rng: &mut impl Rng) -> Vec<Transform> {
    let p: f64 = rng.random_range(0.3..3.0);
    let k: f64 = rng.random_range(0.5..5.0);
    let l: f64 = rng.random_range(1.0..100.0);
    let (a, b): (f64, f64) = (rng.random_range(0.0..0.3), rng.random_range(0.4..0.7));
    let q: f64 = rng.random_range(1.5..4.0);
    let (s, c): (f64, f64) = (rng.random_range(1.0..8.0), rng.random_range(0.2..0.8));
    let sig = move |x: f64| 1.0 / (1.0 + (-s * (x - c)).exp());
    vec![
        Box::new(move |x| x.powf(p)),
        Box::new(move |x| (k * x).exp_m1() / k.exp_m1()),
        Box::new(move |x| (l * x).ln_1p() / l.ln_1p()),
        Box::new(move |x| a + b * x),
        Box::new(|x| (std::f64::consts::FRAC_PI_2 * x).sin()),
        Box::new(move |x| (sig(x) - sig(0.0)) / (sig(1.0) - sig(0.0))),
        Box::new(|x| (x + x * x * x) / 2.0),
        Box::new(f64::sqrt),
        Box::new(move |x| 1.0 - (1.0 - x).powf(q)),
        Box::new(|x| x * x * (3.0 - 2.0 * x)),
    ]
}

fn monotone_invariance() -> Verdict {
    let mut rng = seed::rng(3);
    let fixtures = 5;
    for f in 0..fixtures {
        let n = rng.random_range(500..3000);
        let s = random_set(&mut rng, n);
        let (e, r) = (compute_eer(&s).map_err(e2s)?.eer, fmr100(&s).map_err(e2s)?.fnmr);
        for (t, tf) in transforms(&mut rng).iter().enumerate() {
            let m = ScoreSet::new(
                s.records().iter().map(|x| ScoreRecord { score: tf(x.score).clamp(0.0, 1.0), ..x.clone() }).collect(),
            )
            .map_err(e2s)?;
            let (e2, r2) = (compute_eer(&m).map_err(e2s)?.eer, fmr100(&m).map_err(e2s)?.fnmr);
            ensure((e - e2).abs() <= 1e-9 && (r - r2).abs() <= 1e-9, || {
                format!("fixture {f} transform {t}: EER {e} -> {e2}, FMR100 {r} -> {r2}")
            })?;
        }
    }
    Ok(format!("{fixtures} fixtures x 10 transforms"))
}

// ---------------------------------------------------------------- GRM

const W: [f64; 6] = [0.9, -0.15, -0.2, 0.6, 0.05, -2.0];

fn random_log(rng: &mut impl Rng) -> TrainingLog {
    let n: u32 = rng.random_range(4..30);
    let (l0, linf, r) = (rng.random_range(1.0..2.5), rng.random_range(0.05..0.6), rng.random_range(0.05..0.5));
    let epochs = (1..=n)
        .map(|t| EpochRecord {
            epoch: t,
            train_loss: linf + (l0 - linf) * (-r * t as f64).exp() * rng.random_range(0.9..1.1),
            batch_loss_variance: rng.random_range(0.0..0.2),
            val_metric: None,
        })
        .collect();
    TrainingLog::new(n, epochs).expect("well-formed log")
}

fn linear_trials(rng: &mut impl Rng, n: usize, noise: f64) -> (Vec<TrialRecord>, Vec<f64>) {
    let mut out = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let log = random_log(rng);
        let v = extract_dynamics_features(&log).expect("features");
        let p: f64 = W.iter().zip(v.as_slice()).map(|(w, x)| w * x).sum();
        let eps: f64 = rng.sample(StandardNormal);
        clean.push(p);
        out.push(TrialRecord {
            arch: "c".into(),
            config: Configuration::new(),
            fidelity: FidelityLevel::full(log.budget),
            curriculum: None,
            log,
            final_performance: Some(p + noise * eps),
        });
    }
    (out, clean)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn reward_model_recovery() -> Verdict {
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let (train, _) = linear_trials(&mut seed::rng_for(s, &[]), 40, 0.0);
        let m = estimate_reward_model(&train, None, 0.0).map_err(e2s)?;
        for (got, want) in m.weights.iter().zip(W) {
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("noiseless weight error {worst:.2e}"))?;
    let mut good = 0;
    for s in 0..20 {
        let mut rng = seed::rng_for(100 + s, &[]);
        let (train, _) = linear_trials(&mut rng, 40, 0.01);
        let (test, truth) = linear_trials(&mut rng, 40, 0.0);
        let m = estimate_reward_model(&train, None, 1e-6).map_err(e2s)?;
        let pred = test
            .iter()
            .map(|t| predict_performance(&m, &extract_dynamics_features(&t.log).map_err(e2s)?).map_err(e2s))
            .collect::<Result<Vec<f64>, String>>()?;
        good += usize::from(spearman(&pred, &truth) >= 0.8);
    }
    ensure(good >= 18, || format!("Spearman >= 0.8 in only {good}/20 seeds"))?;
    Ok(format!("weight error {worst:.1e}; rank correlation >= 0.8 in {good}/20 seeds"))
}

const PLANTED_ACTION: usize = 3;

fn planted_benchmark() -> (SyntheticBenchmark, stepsearch_core::space::ActionSet) {
    let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap();
    let actions = discretize(&space, 8, 0).unwrap();
    let mut m = CurveModel::bowl(&space, actions.get(PLANTED_ACTION).unwrap().clone()).unwrap();
    m.base_loss = 0.1;
    m.weights = vec![2.0];
    m.init_loss = 2.5;
    m.noise = 0.02;
    m.variance_noise = 0.1;
    let curves = BTreeMap::from([(ArchitectureClass::new("c"), m)]);
    (SyntheticBenchmark::new(space, 1000, curves, CurriculumEffect::default()).unwrap(), actions)
}

fn grm_end_to_end() -> Verdict {
    let (bench, actions) = planted_benchmark();
    let cfg = GrmConfig { max_episodes: 200, full_epochs: 1000, partial_epochs: Some(10), ..GrmConfig::default() };
    let exhaustive = actions.len() as f64 * cfg.full_epochs as f64;
    let (mut hits, mut max_frac) = (0, 0.0f64);
    for s in 0..20 {
        let out = grm_search(bench.space(), &actions, &bench, &cfg, s, None, &Executor::new(1), &mut NoopObserver)
            .map_err(e2s)?;
        hits += usize::from(out.policy[&ArchitectureClass::new("c")] == PLANTED_ACTION);
        max_frac = max_frac.max(out.state.phase2_epochs as f64 / exhaustive);
    }
    ensure(hits >= 16, || format!("planted action chosen in {hits}/20 seeds"))?;
    ensure(max_frac <= 0.25, || format!("search used {:.1}% of exhaustive training", 100.0 * max_frac))?;
    Ok(format!("{hits}/20 seeds; search epochs {:.0}% of exhaustive", 100.0 * max_frac))
}

// ---------------------------------------------------------------- TI-MFBO

fn dense_posterior(kernel: &Kernel, obs: &[Observation], x: &[f64]) -> (f64, f64) {
    let n = obs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&obs[i].x, &obs[j].x));
    for i in 0..n {
        k[(i, i)] += kernel.noise_variance;
    }
    let inv = k.try_inverse().expect("invertible");
    let ks = DVector::from_fn(n, |i, _| kernel.eval(&obs[i].x, x));
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
    let mean = ks.dot(&(&inv * y));
    let var = kernel.eval(x, x) - ks.dot(&(&inv * &ks));
    (mean, var.max(0.0))
}

fn gp_and_ei() -> Verdict {
    let mut worst: f64 = 0.0;
    for ds in 0..20u64 {
        let mut rng = seed::rng_for(7, &[ds]);
        let d = rng.random_range(1..5);
        let n = rng.random_range(3..40);
        let kernel = Kernel {
            lengthscales: (0..d).map(|_| rng.random_range(0.2..1.5)).collect(),
            signal_variance: rng.random_range(0.5..2.0),
            noise_variance: 1e-3,
        };
        let obs: Vec<Observation> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                let y = (3.0 * x[0]).sin() + x.iter().sum::<f64>() * 0.3 + 0.05 * rng.random::<f64>();
                Observation::new(x, y)
            })
            .collect();
        let gp = GpSurrogate::fit(obs.clone(), kernel.clone()).map_err(e2s)?;
        for _ in 0..50 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-0.2..1.2)).collect();
            let (m, v) = gp.posterior(&q).map_err(e2s)?;
            let (mo, vo) = dense_posterior(&kernel, &obs, &q);
            worst = worst.max((m - mo).abs()).max((v - vo).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("posterior differs from dense oracle by {worst:.2e}"))?;

    let mut rng = seed::rng(11);
    let draws = 1_000_000;
    let mut max_z: f64 = 0.0;
    for mu in [0.4, 0.5, 0.6] {
        for sigma in [0.05, 0.1, 0.3] {
            for best in [0.45, 0.5, 0.6] {
                let (mut sum, mut sum2) = (0.0, 0.0);
                for _ in 0..draws {
                    let z: f64 = rng.sample(StandardNormal);
                    let g = (mu + sigma * z - best).max(0.0);
                    sum += g;
                    sum2 += g * g;
                }
                let mean = sum / draws as f64;
                let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
                let ei = expected_improvement(mu, sigma, best);
                let z = (ei - mean).abs() / se;
                max_z = max_z.max(z);
                ensure(z <= 3.0, || format!("EI({mu}, {sigma}, {best}) = {ei}, Monte Carlo {mean} +- {se}"))?;
            }
        }
    }
    Ok(format!("posterior error {worst:.1e}; EI within {max_z:.2} SE on 27 points"))
}

fn bowl(dims: usize, epochs: u32) -> SyntheticBenchmark {
    let params = (0..dims).map(|i| ParameterSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect();
    SyntheticBenchmark::quadratic_bowl(SearchSpace::new(vec!["net".into()], params).unwrap(), epochs).unwrap()
}

/// One-sided exact binomial tail P(X >= wins) at p = 1/2.
fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut tail = if wins == 0 { 1.0 } else { 0.0 };
    for k in 1..=n {
        c = c * (n - k + 1) as f64 / k as f64;
        if k >= wins {
            tail += c;
        }
    }
    tail / 2f64.powi(n as i32)
}

fn timfbo_benchmark() -> Verdict {
    let b = bowl(3, 100);
    let class = b.space().classes()[0].clone();
    let optimum = b.optimum().value;
    let cfg = TimfboConfig::default();
    let sched = cfg.schedule().map_err(e2s)?;
    let mut close = 0;
    for s in 0..20 {
        let out = timfbo_search(b.space(), &b, &sched, None, 30.0, &cfg, s, None, &Executor::new(1), &mut NoopObserver)
            .map_err(e2s)?;
        let inc = out.incumbent.ok_or("no incumbent")?;
        close += usize::from(optimum - b.true_performance(&class, &inc.config).map_err(e2s)? <= 0.05);
    }
    ensure(close >= 16, || format!("within 0.05 of the optimum in {close}/20 seeds"))?;

    let b = bowl(4, 100);
    let class = b.space().classes()[0].clone();
    let cfg = TimfboConfig { pool_size: 512, ..TimfboConfig::default() };
    let sched = cfg.schedule().map_err(e2s)?;
    let (mut wins, mut losses) = (0, 0);
    for s in 0..40u64 {
        let points = (0..30)
            .map(|k| {
                let c = sample_random(b.space(), seed::derive(1000 + s, &[k]));
                Ok(ProxyPoint {
                    x: surrogate_encoding(b.space(), &class, &c).map_err(e2s)?,
                    y: b.true_performance(&class, &c).map_err(e2s)?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let proxy = ProxyDataset { fidelity: 0.0, points };
        let run = |p: Option<&ProxyDataset>| -> Result<f64, String> {
            let out = timfbo_search(b.space(), &b, &sched, p, 3.0, &cfg, s, None, &Executor::new(1), &mut NoopObserver)
                .map_err(e2s)?;
            b.true_performance(&class, &out.incumbent.ok_or("no incumbent")?.config).map_err(e2s)
        };
        let (warm, cold) = (run(Some(&proxy))?, run(None)?);
        if warm > cold {
            wins += 1;
        } else if warm < cold {
            losses += 1;
        }
    }
    let p = sign_test_p(wins, wins + losses);
    ensure(p < 0.05, || format!("warm start won {wins}, lost {losses} (p = {p:.3})"))?;
    Ok(format!("{close}/20 seeds within 0.05; warm start {wins}-{losses} (p = {p:.1e})"))
}

fn promotion_oracle() -> Verdict {
    let mut rng = seed::rng(5);
    for r in 0..100 {
        let n: usize = rng.random_range(1..80);
        let eta = rng.random_range(2..6);
        let ys: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 10.0).floor() / 10.0).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
        let want: Vec<usize> = order[..n.div_ceil(eta)].to_vec();
        let got = promote_indices(&ys, eta).map_err(e2s)?;
        ensure(got == want, || format!("rung {r}: promoted {got:?}, oracle {want:?}"))?;
    }
    Ok("100 rungs".into())
}

// ---------------------------------------------------------------- ECCO

fn ecco_space() -> SearchSpace {
    SearchSpace::new(
        vec!["net".into()],
        vec![
            ParameterSpec::log_continuous("lr", 1e-4, 1e-1),
            ParameterSpec::continuous("dropout", 0.0, 0.5),
            ParameterSpec::categorical("opt", ["adam", "adamw", "sgd"]),
        ],
    )
    .unwrap()
}

fn ecco_bench(epochs: u32) -> SyntheticBenchmark {
    SyntheticBenchmark::quadratic_bowl(ecco_space(), epochs)
        .unwrap()
        .with_curriculum_effect(CurriculumEffect { coverage_weight: 0.3, warmup_weight: 0.5, target_warmup: 0.2 })
}

fn ecco_operators() -> Verdict {
    let mut rng = seed::rng(21);
    for _ in 0..10_000 {
        let p: f64 = rng.random_range(-10.0..10.0);
        let beta = sbx_beta(rng.random_range(0.5..30.0), rng.random());
        let (c1, c2) = sbx_children(p, p, beta);
        ensure(c1 == p && c2 == p, || format!("identical parents {p} gave {c1}, {c2}"))?;
    }
    let (p1, p2) = (0.2, 0.7);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let (c1, c2) = sbx_children(p1, p2, sbx_beta(2.0, rng.random()));
        sum += 0.5 * (c1 + c2);
    }
    let mean = sum / n as f64;
    ensure((mean - 0.45).abs() <= 0.005, || format!("child mean {mean}"))?;

    let e = 30;
    let b = ecco_bench(e);
    let cfg = EccoConfig {
        full_epochs: e,
        mutation: MutationRates { gene: 0.4, boundary: 0.6, add_tag: 0.3, ..MutationRates::default() },
        ..EccoConfig::default()
    };
    let mut obs = MemoryObserver::default();
    let out = ecco_search(b.space(), &b, &cfg, 5, None, &Executor::new(1), &mut obs).map_err(e2s)?;
    for ev in &obs.events {
        ev.genome.validate(b.space(), e).map_err(|err| format!("invalid genome: {err}"))?;
    }
    ensure(out.history.len() == 30, || format!("{} generations", out.history.len()))?;
    ensure(out.history.windows(2).all(|w| w[1].best >= w[0].best), || "best scalar decreased".into())?;
    Ok(format!("child mean {mean:.4}; {} genomes valid over 30 generations", obs.events.len()))
}

fn ecco_end_to_end() -> Verdict {
    let e = 50;
    let b = ecco_bench(e);
    let cfg = EccoConfig { lambda: 0.0, full_epochs: e, ..EccoConfig::default() };
    let mut hits = 0;
    for s in 0..20 {
        let out = ecco_search(b.space(), &b, &cfg, s, None, &Executor::new(1), &mut NoopObserver).map_err(e2s)?;
        hits += usize::from(b.optimum().value - out.best.fitness.scalar <= 0.05);
    }
    ensure(hits >= 16, || format!("within 0.05 in {hits}/20 seeds"))?;
    Ok(format!("{hits}/20 seeds within 0.05 at pop {} x {} generations", cfg.pop_size, cfg.generations))
}

// ---------------------------------------------------------------- files

fn submission_format() -> Verdict {
    let lines = |n: usize| "0.5\n".repeat(n).into_bytes();
    let with = |k: usize, tok: &str| {
        let mut l = vec!["0.5"; SUBMISSION_SCORES];
        l[k] = tok;
        (l.join("\n") + "\n").into_bytes()
    };
    let ok = parse_submission(&lines(SUBMISSION_SCORES), b"0.5\n", SUBMISSION_SCORES).map_err(e2s)?;
    ensure(ok.scores.len() == SUBMISSION_SCORES, || "conforming file lost values".into())?;

    let short = parse_submission(&lines(SUBMISSION_SCORES - 1), b"0.5\n", SUBMISSION_SCORES);
    ensure(
        short == Err(SubmissionError::Count { file: SubmissionFile::Scores, expected: 10_000, found: 9_999 }),
        || format!("short file: {short:?}"),
    )?;
    let range = parse_submission(&with(41, "1.5"), b"0.5", SUBMISSION_SCORES);
    ensure(
        matches!(&range, Err(e @ SubmissionError::OutOfRange { .. }) if e.line() == Some(42)),
        || format!("out of range: {range:?}"),
    )?;
    let token = parse_submission(&with(9_999, "abc"), b"0.5", SUBMISSION_SCORES);
    ensure(
        token
            == Err(SubmissionError::NotNumeric { file: SubmissionFile::Scores, line: 10_000, token: "abc".into() }),
        || format!("non-numeric: {token:?}"),
    )?;
    let empty = parse_submission(&lines(SUBMISSION_SCORES), b"", SUBMISSION_SCORES);
    ensure(empty == Err(SubmissionError::Empty { file: SubmissionFile::Threshold }), || format!("empty: {empty:?}"))?;
    Ok("conforming file accepted; 4 malformed files rejected at the right place".into())
}

const SPACE: &str = r#"classes = ["cnn", "vit"]

[[params]]
name = "lr"
kind = "continuous"
lo = 1e-4
hi = 1e-1
log = true

[[params]]
name = "batch"
kind = "integer"
lo = 16
hi = 256

[[params]]
name = "opt"
kind = "categorical"
values = ["adam", "adamw", "sgd"]
"#;

const RUN: &str = r#"space = "space.toml"

[benchmark]
kind = "seeded"
noise = 0.02
seed = 9

[actions]
bins = 3
cap = 24

[grm]
full_epochs = 20
partial_epochs = 5
max_episodes = 30

[timfbo]
full_epochs = 27
pool_size = 128
refine_top = 2
refine_steps = 4

[ecco]
full_epochs = 20
pop_size = 8
generations = 5
"#;

fn search(dir: &Path, strategy: &str, out: &str, workers: usize) -> Result<Vec<u8>, String> {
    let budget = if strategy == "timfbo" { "4" } else { "5" };
    let status = Command::new(env!("CARGO_BIN_EXE_stepsearch"))
        .args(["search", strategy, "--config"])
        .arg(dir.join("run.toml"))
        .args(["--seed", "17", "--budget", budget, "--run-id", "r", "--workers", &workers.to_string()])
        .arg("--output")
        .arg(dir.join(out))
        .output()
        .map_err(e2s)?;
    ensure(status.status.success(), || {
        format!("{strategy} search failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    fs::read(dir.join(out).join("r").join("best_config.json")).map_err(e2s)
}

fn deterministic_search() -> Verdict {
    let dir = tempfile::tempdir().map_err(e2s)?;
    fs::write(dir.path().join("space.toml"), SPACE).map_err(e2s)?;
    fs::write(dir.path().join("run.toml"), RUN).map_err(e2s)?;
    for strategy in ["grm", "timfbo", "ecco"] {
        let a = search(dir.path(), strategy, &format!("{strategy}-a"), 1)?;
        let b = search(dir.path(), strategy, &format!("{strategy}-b"), 1)?;
        let c = search(dir.path(), strategy, &format!("{strategy}-c"), 3)?;
        ensure(a == b, || format!("{strategy}: two runs differ"))?;
        ensure(a == c, || format!("{strategy}: 1 and 3 workers differ"))?;
    }
    Ok("grm, timfbo and ecco best configs identical across reruns and worker counts".into())
}

// ---------------------------------------------------------------- driver

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Verdict,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "leaderboard accuracy identities", budget: secs(1), check: leaderboard_identities },
        Criterion { id: 2, name: "EER equals exhaustive sweep", budget: secs(30), check: eer_oracle },
        Criterion { id: 3, name: "monotone transform invariance", budget: secs(10), check: monotone_invariance },
        Criterion { id: 4, name: "reward model recovery", budget: secs(60), check: reward_model_recovery },
        Criterion { id: 5, name: "GRM finds planted action", budget: secs(120), check: grm_end_to_end },
        Criterion { id: 6, name: "GP posterior and EI", budget: secs(120), check: gp_and_ei },
        Criterion { id: 7, name: "TI-MFBO on the bowl", budget: secs(300), check: timfbo_benchmark },
        Criterion { id: 8, name: "successive-halving promotion", budget: secs(5), check: promotion_oracle },
        Criterion { id: 9, name: "ECCO operators", budget: secs(120), check: ecco_operators },
        Criterion { id: 10, name: "ECCO finds planted optimum", budget: secs(300), check: ecco_end_to_end },
        Criterion { id: 11, name: "submission format", budget: secs(1), check: submission_format },
        Criterion { id: 12, name: "deterministic search artifacts", budget: secs(120), check: deterministic_search },
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|id| id == c.id)) {
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let verdict = match verdict {
            Ok(d) if took > c.budget => Err(format!("{d}; took {took:.1?}, budget {:?}", c.budget)),
            v => v,
        };
        match verdict {
            Ok(detail) => println!("[PASS] {:>2} {}: {detail} ({took:.2?})", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2} {}: {detail} ({took:.2?})", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
