//! Joint architecture/hyperparameter search domain.
//!
//! A [`SearchSpace`] pairs a set of opaque architecture class labels with a
//! list of typed parameters. A [`Configuration`] assigns one value to every
//! parameter. Spaces are immutable once built; all sampling is seeded.

mod encode;
mod file;
mod grid;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub use encode::{blocks, decode_unit_cube, encode_unit_cube, encoded_dim, EncodedBlock};
pub use grid::{discretize, discretize_capped, ActionSet, DEFAULT_ACTION_CAP};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("search space needs at least one architecture class")]
    NoClasses,
    #[error("search space needs at least one parameter")]
    NoParams,
    #[error("architecture class names must be non-empty")]
    EmptyClassName,
    #[error("duplicate architecture class {0:?}")]
    DuplicateClass(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),
    #[error("parameter {name:?}: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("override for unknown class {0:?}")]
    UnknownOverrideClass(String),
    #[error("override of {param:?} for class {class:?} does not name a shared parameter")]
    UnknownOverrideParam { class: String, param: String },
    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("discretization needs at least 2 bins per continuous parameter, got {0}")]
    TooFewBins(usize),
    #[error("action cap must be at least 1")]
    ZeroCap,
    #[error("grid has more points than can be indexed")]
    GridTooLarge,
    #[error("encoded vector has dimension {found}, space expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("search space file: {0}")]
    File(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Opaque architecture label, e.g. `"R(2+1)D"` or `"ViT"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchitectureClass(String);

impl ArchitectureClass {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArchitectureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArchitectureClass {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamKind {
    Continuous {
        lo: f64,
        hi: f64,
        #[serde(default)]
        log: bool,
    },
    Integer {
        lo: i64,
        hi: i64,
    },
    Categorical {
        values: Vec<String>,
    },
    /// Fixed-length tuple of integers, each element with its own bounds
    /// (layer sizes, input sample size).
    IntTuple {
        lo: Vec<i64>,
        hi: Vec<i64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParameterSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), kind: ParamKind::Continuous { lo, hi, log: false } }
    }

    pub fn log_continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), kind: ParamKind::Continuous { lo, hi, log: true } }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), kind: ParamKind::Integer { lo, hi } }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical { values: values.into_iter().map(Into::into).collect() },
        }
    }

    /// Tuple of `len` integers sharing the bounds `[lo, hi]`.
    pub fn int_tuple(name: impl Into<String>, len: usize, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), kind: ParamKind::IntTuple { lo: vec![lo; len], hi: vec![hi; len] } }
    }

    fn check(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| SpaceError::InvalidParam { name: self.name.clone(), reason: reason.into() };
        if self.name.is_empty() {
            return Err(bad("name must be non-empty"));
        }
        match &self.kind {
            ParamKind::Continuous { lo, hi, log } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(bad("bounds must be finite"));
                }
                if lo >= hi {
                    return Err(bad("lo must be < hi"));
                }
                if *log && *lo <= 0.0 {
                    return Err(bad("log scale requires lo > 0"));
                }
            }
            ParamKind::Integer { lo, hi } => {
                if lo >= hi {
                    return Err(bad("lo must be < hi"));
                }
            }
            ParamKind::Categorical { values } => {
                if values.is_empty() {
                    return Err(bad("categorical value list is empty"));
                }
                let unique: BTreeSet<_> = values.iter().collect();
                if unique.len() != values.len() {
                    return Err(bad("categorical values must be distinct"));
                }
            }
            ParamKind::IntTuple { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(bad("tuple bounds must be non-empty and of equal length"));
                }
                if lo.iter().zip(hi).any(|(l, h)| l >= h) {
                    return Err(bad("every tuple element needs lo < hi"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> ParamValue {
        match &self.kind {
            ParamKind::Continuous { lo, hi, log: false } => ParamValue::Real(rng.random_range(*lo..=*hi)),
            ParamKind::Continuous { lo, hi, log: true } => {
                ParamValue::Real(rng.random_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi))
            }
            ParamKind::Integer { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            ParamKind::Categorical { values } => ParamValue::Cat(values[rng.random_range(0..values.len())].clone()),
            ParamKind::IntTuple { lo, hi } => {
                ParamValue::Tuple(lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..=*h)).collect())
            }
        }
    }

    fn violations(&self, value: &ParamValue, out: &mut Vec<Violation>) {
        let name = &self.name;
        let mut push = |kind: ViolationKind| out.push(Violation { param: name.clone(), kind });
        match (&self.kind, value) {
            (ParamKind::Continuous { lo, hi, .. }, v) if v.as_real().is_some() => {
                let x = v.as_real().unwrap_or(f64::NAN);
                if !(x >= *lo && x <= *hi) {
                    push(ViolationKind::OutOfBounds { value: x.to_string(), lo: lo.to_string(), hi: hi.to_string() });
                }
            }
            (ParamKind::Integer { lo, hi }, ParamValue::Int(x)) => {
                if x < lo || x > hi {
                    push(ViolationKind::OutOfBounds { value: x.to_string(), lo: lo.to_string(), hi: hi.to_string() });
                }
            }
            (ParamKind::Categorical { values }, ParamValue::Cat(c)) => {
                if !values.contains(c) {
                    push(ViolationKind::NotAMember { value: c.clone() });
                }
            }
            (ParamKind::IntTuple { lo, hi }, ParamValue::Tuple(xs)) => {
                if xs.len() != lo.len() {
                    push(ViolationKind::WrongLength { expected: lo.len(), found: xs.len() });
                } else {
                    for (i, ((x, l), h)) in xs.iter().zip(lo).zip(hi).enumerate() {
                        if x < l || x > h {
                            push(ViolationKind::OutOfBounds {
                                value: format!("{x} (element {i})"),
                                lo: l.to_string(),
                                hi: h.to_string(),
                            });
                        }
                    }
                }
            }
            (kind, v) => push(ViolationKind::WrongType { expected: kind.type_name(), found: v.type_name() }),
        }
    }
}

impl ParamKind {
    fn type_name(&self) -> &'static str {
        match self {
            ParamKind::Continuous { .. } => "real",
            ParamKind::Integer { .. } => "integer",
            ParamKind::Categorical { .. } => "categorical",
            ParamKind::IntTuple { .. } => "integer tuple",
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, ParamKind::Continuous { .. })
    }
}

/// One parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Tuple(Vec<i64>),
    Cat(String),
}

impl ParamValue {
    /// Numeric view; integers widen to reals.
    pub fn as_real(&self) -> Option<f64> {
        match self {
            ParamValue::Real(x) => Some(*x),
            ParamValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            ParamValue::Cat(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[i64]> {
        match self {
            ParamValue::Tuple(t) => Some(t),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Int(_) => "integer",
            ParamValue::Real(_) => "real",
            ParamValue::Tuple(_) => "integer tuple",
            ParamValue::Cat(_) => "categorical",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(x) => write!(f, "{x}"),
            ParamValue::Cat(s) => f.write_str(s),
            ParamValue::Tuple(t) => {
                let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

/// Parameter name → value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(BTreeMap<String, ParamValue>);

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: ParamValue) -> Option<ParamValue> {
        self.0.insert(name.into(), value)
    }

    pub fn remove(&mut self, name: &str) -> Option<ParamValue> {
        self.0.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub param: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ViolationKind {
    Missing,
    Unknown,
    OutOfBounds { value: String, lo: String, hi: String },
    NotAMember { value: String },
    WrongType { expected: &'static str, found: &'static str },
    WrongLength { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.param;
        match &self.kind {
            ViolationKind::Missing => write!(f, "missing parameter {p:?}"),
            ViolationKind::Unknown => write!(f, "unknown parameter {p:?}"),
            ViolationKind::OutOfBounds { value, lo, hi } => write!(f, "{p:?} = {value} outside [{lo}, {hi}]"),
            ViolationKind::NotAMember { value } => write!(f, "{p:?} = {value:?} is not an allowed value"),
            ViolationKind::WrongType { expected, found } => write!(f, "{p:?} expects {expected}, found {found}"),
            ViolationKind::WrongLength { expected, found } => {
                write!(f, "{p:?} expects {expected} elements, found {found}")
            }
        }
    }
}

/// The joint architecture/hyperparameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "file::RawSpace", into = "file::RawSpace")]
pub struct SearchSpace {
    classes: Vec<ArchitectureClass>,
    params: Vec<ParameterSpec>,
    overrides: BTreeMap<ArchitectureClass, Vec<ParameterSpec>>,
}

impl SearchSpace {
    pub fn new(classes: Vec<ArchitectureClass>, params: Vec<ParameterSpec>) -> Result<Self, SpaceError> {
        Self::with_overrides(classes, params, BTreeMap::new())
    }

    /// Builds a space where some classes redefine shared parameters. An
    /// override replaces the shared parameter of the same name; the parameter
    /// name set is identical for every class.
    pub fn with_overrides(
        classes: Vec<ArchitectureClass>,
        params: Vec<ParameterSpec>,
        overrides: BTreeMap<ArchitectureClass, Vec<ParameterSpec>>,
    ) -> Result<Self, SpaceError> {
        if classes.is_empty() {
            return Err(SpaceError::NoClasses);
        }
        if params.is_empty() {
            return Err(SpaceError::NoParams);
        }
        let mut seen = BTreeSet::new();
        for c in &classes {
            if c.name().is_empty() {
                return Err(SpaceError::EmptyClassName);
            }
            if !seen.insert(c.name()) {
                return Err(SpaceError::DuplicateClass(c.name().to_string()));
            }
        }
        let mut names = BTreeSet::new();
        for p in &params {
            p.check()?;
            if !names.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateParam(p.name.clone()));
            }
        }
        for (class, specs) in &overrides {
            if !classes.contains(class) {
                return Err(SpaceError::UnknownOverrideClass(class.name().to_string()));
            }
            let mut local = BTreeSet::new();
            for p in specs {
                p.check()?;
                if !names.contains(p.name.as_str()) {
                    return Err(SpaceError::UnknownOverrideParam {
                        class: class.name().to_string(),
                        param: p.name.clone(),
                    });
                }
                if !local.insert(p.name.as_str()) {
                    return Err(SpaceError::DuplicateParam(p.name.clone()));
                }
            }
        }
        Ok(Self { classes, params, overrides })
    }

    pub fn classes(&self) -> &[ArchitectureClass] {
        &self.classes
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    /// The effective single-class space for `class` (overrides applied).
    pub fn for_class(&self, class: &ArchitectureClass) -> SearchSpace {
        let params = match self.overrides.get(class) {
            None => self.params.clone(),
            Some(ov) => self
                .params
                .iter()
                .map(|p| ov.iter().find(|o| o.name == p.name).unwrap_or(p).clone())
                .collect(),
        };
        SearchSpace { classes: vec![class.clone()], params, overrides: BTreeMap::new() }
    }

    /// Widens integer literals given for continuous parameters into reals, so
    /// hand-written configurations compare equal to sampled ones.
    pub fn normalize(&self, config: &Configuration) -> Configuration {
        let mut out = config.clone();
        for p in &self.params {
            if let (ParamKind::Continuous { .. }, Some(ParamValue::Int(i))) = (&p.kind, config.get(&p.name)) {
                out.insert(p.name.clone(), ParamValue::Real(*i as f64));
            }
        }
        out
    }

    /// Returns `Ok` or the full violation list.
    pub fn check(&self, config: &Configuration) -> Result<(), SpaceError> {
        let v = validate_config(self, config);
        if v.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::InvalidConfig(v))
        }
    }
}

/// Draws one configuration: uniform per parameter, log-uniform where flagged.
pub fn sample_random(space: &SearchSpace, seed: u64) -> Configuration {
    sample_with(space, &mut seed::rng(seed))
}

pub fn sample_with(space: &SearchSpace, rng: &mut impl Rng) -> Configuration {
    Configuration(space.params.iter().map(|p| (p.name.clone(), p.sample(rng))).collect())
}

/// Lists every bound, membership, type and key-set violation. Empty iff valid.
pub fn validate_config(space: &SearchSpace, config: &Configuration) -> Vec<Violation> {
    let mut out = Vec::new();
    for p in &space.params {
        match config.get(&p.name) {
            None => out.push(Violation { param: p.name.clone(), kind: ViolationKind::Missing }),
            Some(v) => p.violations(v, &mut out),
        }
    }
    for name in config.0.keys() {
        if space.param(name).is_none() {
            out.push(Violation { param: name.clone(), kind: ViolationKind::Unknown });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lr_space() -> SearchSpace {
        SearchSpace::new(
            vec!["R(2+1)D".into()],
            vec![
                ParameterSpec::log_continuous("lr", 1e-4, 1e-1),
                ParameterSpec::categorical("optimizer", ["Adam", "AdamW", "SGD"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn singleton_categorical_always_sampled() {
        let space = SearchSpace::new(vec!["c".into()], vec![ParameterSpec::categorical("optimizer", ["Adam"])]).unwrap();
        for s in 0..50 {
            let c = sample_random(&space, s);
            assert_eq!(c.get("optimizer"), Some(&ParamValue::Cat("Adam".into())));
            assert_eq!(c.len(), 1);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let space = lr_space();
        assert_eq!(sample_random(&space, 11), sample_random(&space, 11));
        assert_ne!(sample_random(&space, 11), sample_random(&space, 12));
    }

    #[test]
    fn negative_lr_names_lr() {
        let space = lr_space();
        let c = Configuration::new()
            .with("lr", ParamValue::Real(-1.0))
            .with("optimizer", ParamValue::Cat("Adam".into()));
        let v = validate_config(&space, &c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].param, "lr");
        assert!(matches!(v[0].kind, ViolationKind::OutOfBounds { .. }));
    }

    #[test]
    fn missing_key_is_reported() {
        let space = lr_space();
        let c = Configuration::new().with("lr", ParamValue::Real(0.01));
        let v = validate_config(&space, &c);
        assert_eq!(v, vec![Violation { param: "optimizer".into(), kind: ViolationKind::Missing }]);
        assert!(v[0].to_string().contains("optimizer"));
    }

    #[test]
    fn unknown_key_and_wrong_type_are_reported() {
        let space = lr_space();
        let c = Configuration::new()
            .with("lr", ParamValue::Cat("fast".into()))
            .with("optimizer", ParamValue::Cat("Adam".into()))
            .with("momentum", ParamValue::Real(0.9));
        let v = validate_config(&space, &c);
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|x| x.param == "momentum" && x.kind == ViolationKind::Unknown));
        assert!(v.iter().any(|x| x.param == "lr" && matches!(x.kind, ViolationKind::WrongType { .. })));
    }

    #[test]
    fn nan_is_out_of_bounds() {
        let space = lr_space();
        let c = Configuration::new()
            .with("lr", ParamValue::Real(f64::NAN))
            .with("optimizer", ParamValue::Cat("SGD".into()));
        assert_eq!(validate_config(&space, &c).len(), 1);
    }

    #[test]
    fn space_invariants_are_enforced() {
        let c = || vec![ArchitectureClass::new("a")];
        assert_eq!(SearchSpace::new(vec![], vec![ParameterSpec::integer("x", 0, 1)]), Err(SpaceError::NoClasses));
        assert_eq!(SearchSpace::new(c(), vec![]), Err(SpaceError::NoParams));
        assert!(matches!(
            SearchSpace::new(c(), vec![ParameterSpec::continuous("x", 1.0, 1.0)]),
            Err(SpaceError::InvalidParam { .. })
        ));
        assert!(matches!(
            SearchSpace::new(c(), vec![ParameterSpec::log_continuous("x", 0.0, 1.0)]),
            Err(SpaceError::InvalidParam { .. })
        ));
        assert!(matches!(
            SearchSpace::new(c(), vec![ParameterSpec::categorical("o", ["a", "a"])]),
            Err(SpaceError::InvalidParam { .. })
        ));
        assert!(matches!(
            SearchSpace::new(c(), vec![ParameterSpec::categorical("o", Vec::<String>::new())]),
            Err(SpaceError::InvalidParam { .. })
        ));
        assert_eq!(
            SearchSpace::new(c(), vec![ParameterSpec::integer("x", 0, 3), ParameterSpec::integer("x", 0, 4)]),
            Err(SpaceError::DuplicateParam("x".into()))
        );
        assert_eq!(
            SearchSpace::new(vec!["a".into(), "a".into()], vec![ParameterSpec::integer("x", 0, 3)]),
            Err(SpaceError::DuplicateClass("a".into()))
        );
        assert_eq!(
            SearchSpace::new(vec!["".into()], vec![ParameterSpec::integer("x", 0, 3)]),
            Err(SpaceError::EmptyClassName)
        );
    }

    #[test]
    fn overrides_replace_shared_params() {
        let mut ov = BTreeMap::new();
        ov.insert(ArchitectureClass::new("ViT"), vec![ParameterSpec::log_continuous("lr", 1e-5, 1e-3)]);
        let space = SearchSpace::with_overrides(
            vec!["R(2+1)D".into(), "ViT".into()],
            vec![ParameterSpec::log_continuous("lr", 1e-4, 1e-1), ParameterSpec::integer("batch", 16, 256)],
            ov,
        )
        .unwrap();
        let vit = space.for_class(&"ViT".into());
        assert_eq!(vit.param("lr").unwrap().kind, ParamKind::Continuous { lo: 1e-5, hi: 1e-3, log: true });
        assert_eq!(vit.params().len(), 2);
        let r = space.for_class(&"R(2+1)D".into());
        assert_eq!(r.params(), space.params());

        let mut bad = BTreeMap::new();
        bad.insert(ArchitectureClass::new("ViT"), vec![ParameterSpec::integer("depth", 1, 4)]);
        assert!(matches!(
            SearchSpace::with_overrides(vec!["ViT".into()], vec![ParameterSpec::integer("batch", 16, 256)], bad),
            Err(SpaceError::UnknownOverrideParam { .. })
        ));
    }

    #[test]
    fn normalize_widens_integer_literals() {
        let space = lr_space();
        let c = Configuration::new().with("lr", ParamValue::Int(0)).with("optimizer", ParamValue::Cat("SGD".into()));
        let n = space.normalize(&c);
        assert_eq!(n.get("lr"), Some(&ParamValue::Real(0.0)));
    }

    #[test]
    fn configuration_json_keeps_value_kinds() {
        let c = Configuration::new()
            .with("lr", ParamValue::Real(0.001))
            .with("clip", ParamValue::Real(10.0))
            .with("batch", ParamValue::Int(128))
            .with("layers", ParamValue::Tuple(vec![3, 3, 3]))
            .with("optimizer", ParamValue::Cat("Adam".into()));
        let text = serde_json::to_string(&c).unwrap();
        let back: Configuration = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
