//! Finite action sets for tabular search.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{encode_unit_cube, Configuration, ParamKind, ParamValue, SearchSpace, SpaceError};
use crate::seed;

pub const DEFAULT_ACTION_CAP: usize = 512;

/// Ordered list of configurations; an action id is a list position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    actions: Vec<Configuration>,
}

impl ActionSet {
    /// Wraps an explicit list. Every member must be valid for `space`.
    pub fn from_configs(space: &SearchSpace, actions: Vec<Configuration>) -> Result<Self, SpaceError> {
        if actions.is_empty() {
            return Err(SpaceError::ZeroCap);
        }
        for a in &actions {
            space.check(a)?;
        }
        Ok(Self { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Configuration> {
        self.actions.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Configuration> {
        self.actions.iter()
    }

    /// Action closest to `config` in the encoded unit cube (lowest id on ties).
    pub fn nearest(&self, space: &SearchSpace, config: &Configuration) -> Result<usize, SpaceError> {
        let target = encode_unit_cube(space, config)?;
        let mut best = (0, f64::INFINITY);
        for (i, a) in self.actions.iter().enumerate() {
            let x = encode_unit_cube(space, a)?;
            let d: f64 = x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }
}

enum Axis {
    Reals(Vec<f64>),
    Ints(Vec<i64>),
    Cats(Vec<String>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::Reals(v) => v.len(),
            Axis::Ints(v) => v.len(),
            Axis::Cats(v) => v.len(),
        }
    }
}

fn real_grid(lo: f64, hi: f64, log: bool, bins: usize) -> Vec<f64> {
    let step = |i: usize| i as f64 / (bins - 1) as f64;
    (0..bins)
        .map(|i| {
            if i + 1 == bins {
                hi
            } else if log {
                (lo.ln() + step(i) * (hi.ln() - lo.ln())).exp()
            } else {
                lo + step(i) * (hi - lo)
            }
        })
        .collect()
}

fn int_grid(lo: i64, hi: i64, bins: usize) -> Vec<i64> {
    let span = (hi - lo) as u128 + 1;
    if span <= bins as u128 {
        return (lo..=hi).collect();
    }
    let mut v: Vec<i64> = (0..bins)
        .map(|i| lo + ((hi - lo) as f64 * i as f64 / (bins - 1) as f64).round() as i64)
        .collect();
    v.dedup();
    v
}

/// One axis per scalar parameter, one per tuple element.
fn axes(space: &SearchSpace, bins: usize) -> Vec<(usize, Axis)> {
    let mut out = Vec::new();
    for (pi, p) in space.params().iter().enumerate() {
        match &p.kind {
            ParamKind::Continuous { lo, hi, log } => out.push((pi, Axis::Reals(real_grid(*lo, *hi, *log, bins)))),
            ParamKind::Integer { lo, hi } => out.push((pi, Axis::Ints(int_grid(*lo, *hi, bins)))),
            ParamKind::Categorical { values } => out.push((pi, Axis::Cats(values.clone()))),
            ParamKind::IntTuple { lo, hi } => {
                for (l, h) in lo.iter().zip(hi) {
                    out.push((pi, Axis::Ints(int_grid(*l, *h, bins))));
                }
            }
        }
    }
    out
}

/// Mixed-radix decode of a grid index; the last axis varies fastest.
fn config_at(space: &SearchSpace, axes: &[(usize, Axis)], mut idx: u128) -> Configuration {
    let mut digits = vec![0usize; axes.len()];
    for (d, (_, axis)) in digits.iter_mut().zip(axes).rev() {
        let n = axis.len() as u128;
        *d = (idx % n) as usize;
        idx /= n;
    }
    let mut config = Configuration::new();
    let mut tuples: Vec<Vec<i64>> = vec![Vec::new(); space.params().len()];
    for (&d, (pi, axis)) in digits.iter().zip(axes) {
        let p = &space.params()[*pi];
        match (axis, &p.kind) {
            (Axis::Ints(v), ParamKind::IntTuple { .. }) => tuples[*pi].push(v[d]),
            (Axis::Ints(v), _) => {
                config.insert(p.name.clone(), ParamValue::Int(v[d]));
            }
            (Axis::Reals(v), _) => {
                config.insert(p.name.clone(), ParamValue::Real(v[d]));
            }
            (Axis::Cats(v), _) => {
                config.insert(p.name.clone(), ParamValue::Cat(v[d].clone()));
            }
        }
    }
    for (pi, t) in tuples.into_iter().enumerate() {
        if !t.is_empty() {
            config.insert(space.params()[pi].name.clone(), ParamValue::Tuple(t));
        }
    }
    config
}

/// Grid discretization with the default cap.
pub fn discretize(space: &SearchSpace, bins_per_continuous: usize, seed: u64) -> Result<ActionSet, SpaceError> {
    discretize_capped(space, bins_per_continuous, DEFAULT_ACTION_CAP, seed)
}

/// Cartesian product of per-parameter grids. Continuous parameters get `bins`
/// linear (or geometric, if log-scaled) points; integers get at most `bins`
/// evenly spaced values; categoricals contribute every value. If the product
/// exceeds `cap`, exactly `cap` distinct grid points are drawn uniformly with
/// `seed` and kept in grid order.
pub fn discretize_capped(space: &SearchSpace, bins: usize, cap: usize, seed: u64) -> Result<ActionSet, SpaceError> {
    if bins < 2 {
        return Err(SpaceError::TooFewBins(bins));
    }
    if cap == 0 {
        return Err(SpaceError::ZeroCap);
    }
    let axes = axes(space, bins);
    let total = axes
        .iter()
        .try_fold(1u128, |acc, (_, a)| acc.checked_mul(a.len() as u128))
        .ok_or(SpaceError::GridTooLarge)?;
    let indices: Vec<u128> = if total <= cap as u128 {
        (0..total).collect()
    } else {
        let total = usize::try_from(total).map_err(|_| SpaceError::GridTooLarge)?;
        let mut picked: Vec<u128> =
            index::sample(&mut seed::rng(seed), total, cap).into_iter().map(|i| i as u128).collect();
        picked.sort_unstable();
        picked
    };
    Ok(ActionSet { actions: indices.into_iter().map(|i| config_at(space, &axes, i)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{validate_config, ParameterSpec};
    use std::collections::HashSet;

    #[test]
    fn product_count() {
        let space = SearchSpace::new(
            vec!["c".into()],
            vec![ParameterSpec::continuous("x", 0.0, 1.0), ParameterSpec::categorical("k", ["a", "b"])],
        )
        .unwrap();
        let a = discretize(&space, 3, 0).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.get(0).unwrap().get("x"), Some(&ParamValue::Real(0.0)));
        assert_eq!(a.get(5).unwrap().get("x"), Some(&ParamValue::Real(1.0)));
        assert_eq!(a.get(1).unwrap().get("k"), Some(&ParamValue::Cat("b".into())));
        assert_eq!(discretize(&space, 3, 0).unwrap(), discretize(&space, 3, 99).unwrap());
    }

    #[test]
    fn log_grid_is_geometric() {
        let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::log_continuous("lr", 1e-4, 1e-1)]).unwrap();
        let a = discretize(&space, 4, 0).unwrap();
        let v: Vec<f64> = a.iter().map(|c| c.get("lr").unwrap().as_real().unwrap()).collect();
        for (x, want) in v.iter().zip([1e-4, 1e-3, 1e-2, 1e-1]) {
            assert!((x / want - 1.0).abs() < 1e-12, "{x} vs {want}");
        }
    }

    #[test]
    fn capped_subsample_is_distinct_valid_and_seeded() {
        // 10 continuous bins x 10 x 10 x 10 x 10 x 10 = 10^6 grid points.
        let params = (0..6).map(|i| ParameterSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect();
        let space = SearchSpace::new(vec!["c".into()], params).unwrap();
        let a = discretize_capped(&space, 10, 1000, 5).unwrap();
        assert_eq!(a.len(), 1000);
        let keys: HashSet<String> = a.iter().map(|c| serde_json::to_string(c).unwrap()).collect();
        assert_eq!(keys.len(), 1000);
        assert!(a.iter().all(|c| validate_config(&space, c).is_empty()));
        assert_eq!(a, discretize_capped(&space, 10, 1000, 5).unwrap());
        assert_ne!(a, discretize_capped(&space, 10, 1000, 6).unwrap());
    }

    #[test]
    fn integer_and_tuple_axes() {
        let space = SearchSpace::new(
            vec!["c".into()],
            vec![ParameterSpec::integer("n", 0, 2), ParameterSpec::int_tuple("t", 2, 1, 100)],
        )
        .unwrap();
        let a = discretize(&space, 3, 0).unwrap();
        assert_eq!(a.len(), 3 * 3 * 3);
        assert!(a.iter().all(|c| space.check(c).is_ok()));
        assert_eq!(a.get(1).unwrap().get("t"), Some(&ParamValue::Tuple(vec![1, 51])));
    }

    #[test]
    fn rejects_degenerate_requests() {
        let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap();
        assert_eq!(discretize(&space, 1, 0), Err(SpaceError::TooFewBins(1)));
        assert_eq!(discretize_capped(&space, 2, 0, 0), Err(SpaceError::ZeroCap));
    }

    #[test]
    fn nearest_snaps_to_grid() {
        let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap();
        let a = discretize(&space, 5, 0).unwrap();
        let c = Configuration::new().with("x", ParamValue::Real(0.6));
        assert_eq!(a.nearest(&space, &c).unwrap(), 2);
        let c = Configuration::new().with("x", ParamValue::Real(0.63));
        assert_eq!(a.nearest(&space, &c).unwrap(), 3);
    }
}
