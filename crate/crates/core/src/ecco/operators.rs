//! Variation and selection operators.
//!
//! Hyperparameters are recombined in the unit-cube encoding of each
//! parent's own class space, so log scales and integer ranges need no special
//! cases: numeric coordinates use SBX, categorical one-hot blocks are swapped
//! whole. Genes a child inherits unchanged keep the parent's exact value.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EccoError, Genome};
use crate::curriculum::{ConditionSet, CurriculumSchedule, Stage};
use crate::seed;
use crate::space::{
    blocks, decode_unit_cube, encode_unit_cube, sample_with, Configuration, ParamKind, SearchSpace,
};

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(eta: f64, u: f64) -> f64 {
    if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    }
}

/// Children `m -/+ beta * (p2 - p1) / 2` around the parents' midpoint `m`.
/// Their mean is the parents' mean and identical parents reproduce exactly.
pub fn sbx_children(p1: f64, p2: f64, beta: f64) -> (f64, f64) {
    let m = 0.5 * (p1 + p2);
    let h = 0.5 * beta * (p2 - p1);
    (m - h, m + h)
}

pub fn sbx_with(p1: f64, p2: f64, eta: f64, bounds: (f64, f64), rng: &mut impl Rng) -> (f64, f64) {
    let beta = sbx_beta(eta, rng.random::<f64>());
    let (c1, c2) = sbx_children(p1, p2, beta);
    (c1.clamp(bounds.0, bounds.1), c2.clamp(bounds.0, bounds.1))
}

/// Simulated binary crossover of two reals, children clipped to `bounds`.
pub fn sbx_crossover(p1: f64, p2: f64, eta: f64, bounds: (f64, f64), seed: u64) -> (f64, f64) {
    sbx_with(p1, p2, eta, bounds, &mut seed::rng(seed))
}

/// Each child independently takes either parent's value with probability 1/2.
pub fn uniform_crossover<T: Clone>(p1: &T, p2: &T, rng: &mut impl Rng) -> (T, T) {
    let pick = |first: bool| if first { p1.clone() } else { p2.clone() };
    let a = rng.random::<bool>();
    let b = rng.random::<bool>();
    (pick(a), pick(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationRates {
    /// Per-gene probability of perturbing a numeric value or resampling a
    /// categorical one.
    pub gene: f64,
    /// Gaussian step as a fraction of each numeric range.
    pub sigma: f64,
    /// Per-stage probability of shifting a stage boundary.
    pub boundary: f64,
    /// Largest boundary shift in epochs.
    pub max_shift: u32,
    /// Per-stage probability of adding one missing condition.
    pub add_tag: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        Self { gene: 0.2, sigma: 0.1, boundary: 0.3, max_shift: 5, add_tag: 0.1 }
    }
}

impl MutationRates {
    pub fn zero() -> Self {
        Self { gene: 0.0, sigma: 0.0, boundary: 0.0, max_shift: 0, add_tag: 0.0 }
    }

    pub fn validate(&self) -> Result<(), EccoError> {
        let p = |v: f64| (0.0..=1.0).contains(&v);
        if !(p(self.gene) && p(self.boundary) && p(self.add_tag)) {
            return Err(EccoError::InvalidConfig("mutation probabilities must lie in [0, 1]".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(EccoError::InvalidConfig("mutation sigma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Rebuilds a configuration from a child encoding. Parameters whose encoded
/// block equals a parent's block keep that parent's value.
fn rebuild(
    space: &SearchSpace,
    child: &[f64],
    parents: &[(&[f64], &Configuration)],
) -> Result<Configuration, EccoError> {
    let mut out = decode_unit_cube(space, child)?;
    for (p, b) in space.params().iter().zip(blocks(space)) {
        let seg = &child[b.offset..b.offset + b.width];
        if let Some((_, cfg)) = parents.iter().find(|(x, _)| x.len() == child.len() && &x[b.offset..b.offset + b.width] == seg) {
            if let Some(v) = cfg.get(&p.name) {
                out.insert(p.name.clone(), v.clone());
            }
        }
    }
    Ok(out)
}

/// Crossover of two hyperparameter sets. The first child's class comes from
/// `a` or `b` with equal odds, and likewise for the second. Genes are then
/// recombined in the encoded space and decoded in each child's class space.
pub fn crossover_hyperparams(
    space: &SearchSpace,
    a: &Genome,
    b: &Genome,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<(Genome, Genome), EccoError> {
    let (ca, cb) = uniform_crossover(&a.class, &b.class, rng);
    let sa = space.for_class(&a.class);
    let sb = space.for_class(&b.class);
    let xa = encode_unit_cube(&sa, &a.hyperparams)?;
    let xb = encode_unit_cube(&sb, &b.hyperparams)?;
    let (mut y1, mut y2) = (xa.clone(), xb.clone());
    if xa.len() == xb.len() {
        for (p, blk) in sa.params().iter().zip(blocks(&sa)) {
            let r = blk.offset..blk.offset + blk.width;
            if let ParamKind::Categorical { .. } = p.kind {
                let (u, v) = uniform_crossover(&xa[r.clone()].to_vec(), &xb[r.clone()].to_vec(), rng);
                y1[r.clone()].copy_from_slice(&u);
                y2[r].copy_from_slice(&v);
            } else {
                for i in r {
                    let (u, v) = sbx_with(xa[i], xb[i], eta, (0.0, 1.0), rng);
                    y1[i] = u;
                    y2[i] = v;
                }
            }
        }
    }
    let parents = [(xa.as_slice(), &a.hyperparams), (xb.as_slice(), &b.hyperparams)];
    let h1 = rebuild(&space.for_class(&ca), &y1, &parents)?;
    let h2 = rebuild(&space.for_class(&cb), &y2, &parents)?;
    Ok((
        Genome { class: ca, hyperparams: h1, curriculum: a.curriculum.clone() },
        Genome { class: cb, hyperparams: h2, curriculum: b.curriculum.clone() },
    ))
}

/// One-point crossover on the epoch axis: a cut epoch `t` is drawn from
/// `2..total_epochs` and each child takes one parent's stages before `t` and
/// the other's from `t` on, followed by repair.
pub fn curriculum_crossover(
    a: &CurriculumSchedule,
    b: &CurriculumSchedule,
    total_epochs: u32,
    rng: &mut impl Rng,
) -> (CurriculumSchedule, CurriculumSchedule) {
    if total_epochs <= 2 {
        return (a.clone(), b.clone());
    }
    let t = rng.random_range(2..total_epochs);
    let splice = |head: &CurriculumSchedule, tail: &CurriculumSchedule| {
        let stages: Vec<Stage> = head
            .stages()
            .iter()
            .filter(|s| s.start_epoch < t)
            .chain(tail.stages().iter().filter(|s| s.start_epoch >= t))
            .copied()
            .collect();
        CurriculumSchedule::repair(stages, total_epochs)
    };
    (splice(a, b), splice(b, a))
}

/// Full recombination: hyperparameters, then the curricula.
pub fn crossover_genomes(
    space: &SearchSpace,
    a: &Genome,
    b: &Genome,
    eta: f64,
    total_epochs: u32,
    rng: &mut impl Rng,
) -> Result<(Genome, Genome), EccoError> {
    let (mut c1, mut c2) = crossover_hyperparams(space, a, b, eta, rng)?;
    let (k1, k2) = curriculum_crossover(&a.curriculum, &b.curriculum, total_epochs, rng);
    c1.curriculum = k1;
    c2.curriculum = k2;
    Ok((c1, c2))
}

/// Perturbs a genome. Numeric genes take a Gaussian step of `sigma` in
/// encoded units, categoricals are resampled uniformly, later stage
/// boundaries shift by up to `max_shift` epochs either way, and any stage may
/// gain one condition. The result is repaired, so it is always valid.
pub fn mutate_genome(
    g: &Genome,
    rates: &MutationRates,
    space: &SearchSpace,
    total_epochs: u32,
    rng: &mut impl Rng,
) -> Result<Genome, EccoError> {
    let local = space.for_class(&g.class);
    let x = encode_unit_cube(&local, &g.hyperparams)?;
    let mut y = x.clone();
    for (p, blk) in local.params().iter().zip(blocks(&local)) {
        let r = blk.offset..blk.offset + blk.width;
        if let ParamKind::Categorical { .. } = p.kind {
            if rng.random::<f64>() < rates.gene {
                let pick = rng.random_range(0..blk.width);
                for (k, v) in y[r].iter_mut().enumerate() {
                    *v = if k == pick { 1.0 } else { 0.0 };
                }
            }
        } else {
            for i in r {
                if rng.random::<f64>() < rates.gene {
                    let z: f64 = rng.sample(StandardNormal);
                    y[i] = (y[i] + rates.sigma * z).clamp(0.0, 1.0);
                }
            }
        }
    }
    let hyperparams = rebuild(&local, &y, &[(x.as_slice(), &g.hyperparams)])?;

    let mut stages = g.curriculum.stages().to_vec();
    let mut touched = false;
    for s in stages.iter_mut().skip(1) {
        if rates.max_shift > 0 && rng.random::<f64>() < rates.boundary {
            let step = i64::from(rng.random_range(1..=rates.max_shift));
            let step = if rng.random::<bool>() { step } else { -step };
            s.start_epoch = (i64::from(s.start_epoch) + step).max(1) as u32;
            touched = true;
        }
    }
    for s in stages.iter_mut() {
        if rng.random::<f64>() < rates.add_tag {
            if let Some(t) = s.conditions.random_missing(rng) {
                s.conditions.insert(t);
                touched = true;
            }
        }
    }
    let curriculum = if touched { CurriculumSchedule::repair(stages, total_epochs) } else { g.curriculum.clone() };
    Ok(Genome { class: g.class.clone(), hyperparams, curriculum })
}

/// Random schedule of 1 to 4 stages. The first stage holds each condition
/// with probability 1/2 (at least one); later stages add each missing one
/// with probability 1/2.
pub fn random_curriculum(total_epochs: u32, rng: &mut impl Rng) -> CurriculumSchedule {
    let total_epochs = total_epochs.max(2);
    let max_stages = (total_epochs - 1).min(4) as usize;
    let k = rng.random_range(1..=max_stages);
    let mut starts = vec![1u32];
    starts.extend(sample(rng, total_epochs as usize - 2, k - 1).into_iter().map(|i| i as u32 + 2));
    starts.sort_unstable();
    let mut acc = ConditionSet::empty();
    let mut stages = Vec::with_capacity(k);
    for (i, start) in starts.into_iter().enumerate() {
        let missing: Vec<_> = acc.missing().collect();
        for t in missing {
            if rng.random::<bool>() {
                acc.insert(t);
            }
        }
        if i == 0 && acc.is_empty() {
            acc.insert(acc.random_missing(rng).expect("empty set misses every tag"));
        }
        stages.push(Stage { start_epoch: start, conditions: acc });
    }
    CurriculumSchedule::repair(stages, total_epochs)
}

pub fn random_genome(space: &SearchSpace, total_epochs: u32, rng: &mut impl Rng) -> Genome {
    let classes = space.classes();
    let class = classes[rng.random_range(0..classes.len())].clone();
    let hyperparams = sample_with(&space.for_class(&class), rng);
    let curriculum = random_curriculum(total_epochs, rng);
    Genome { class, hyperparams, curriculum }
}

/// Draws `k` indices uniformly with replacement and returns the one with the
/// highest score; ties go to the smaller index.
pub fn tournament_select(scores: &[f64], k: usize, rng: &mut impl Rng) -> Result<usize, EccoError> {
    if scores.is_empty() {
        return Err(EccoError::EmptyPopulation);
    }
    if k == 0 {
        return Err(EccoError::InvalidConfig("tournament size must be at least 1".into()));
    }
    let mut best = rng.random_range(0..scores.len());
    for _ in 1..k {
        let c = rng.random_range(0..scores.len());
        if scores[c] > scores[best] || (scores[c] == scores[best] && c < best) {
            best = c;
        }
    }
    Ok(best)
}
