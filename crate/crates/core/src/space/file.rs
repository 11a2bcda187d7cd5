//! On-disk search space schema (TOML or JSON).
//!
//! ```toml
//! classes = ["R(2+1)D", "ViT"]
//!
//! [[params]]
//! name = "lr"
//! kind = "continuous"     # continuous | integer | categorical | int_tuple
//! lo = 1e-4
//! hi = 0.1
//! log = true
//!
//! [[params]]
//! name = "layer_sizes"
//! kind = "int_tuple"
//! length = 5              # with scalar lo/hi; or give lo/hi as arrays
//! lo = 1
//! hi = 6
//!
//! [[overrides.ViT]]       # optional per-class redefinitions
//! name = "lr"
//! kind = "continuous"
//! lo = 1e-5
//! hi = 1e-3
//! log = true
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureClass, ParamKind, ParameterSpec, SearchSpace, SpaceError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Int(i64),
    Real(f64),
    List(Vec<i64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct RawSpace {
    classes: Vec<String>,
    params: Vec<RawParam>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    overrides: BTreeMap<String, Vec<RawParam>>,
}

fn real(b: &Option<Bound>, name: &str, which: &str) -> Result<f64, SpaceError> {
    match b {
        Some(Bound::Real(x)) => Ok(*x),
        Some(Bound::Int(i)) => Ok(*i as f64),
        _ => Err(SpaceError::File(format!("parameter {name:?}: `{which}` must be a number"))),
    }
}

fn int(b: &Option<Bound>, name: &str, which: &str) -> Result<i64, SpaceError> {
    match b {
        Some(Bound::Int(i)) => Ok(*i),
        _ => Err(SpaceError::File(format!("parameter {name:?}: `{which}` must be an integer"))),
    }
}

fn tuple_bound(b: &Option<Bound>, length: Option<usize>, name: &str, which: &str) -> Result<Vec<i64>, SpaceError> {
    match (b, length) {
        (Some(Bound::List(v)), None) => Ok(v.clone()),
        (Some(Bound::List(v)), Some(n)) if v.len() == n => Ok(v.clone()),
        (Some(Bound::Int(i)), Some(n)) => Ok(vec![*i; n]),
        _ => Err(SpaceError::File(format!(
            "parameter {name:?}: `{which}` must be an integer list, or an integer together with `length`"
        ))),
    }
}

impl TryFrom<RawParam> for ParameterSpec {
    type Error = SpaceError;

    fn try_from(r: RawParam) -> Result<Self, SpaceError> {
        let n = r.name.as_str();
        let kind = match r.kind.as_str() {
            "continuous" => ParamKind::Continuous {
                lo: real(&r.lo, n, "lo")?,
                hi: real(&r.hi, n, "hi")?,
                log: r.log.unwrap_or(false),
            },
            "integer" => ParamKind::Integer { lo: int(&r.lo, n, "lo")?, hi: int(&r.hi, n, "hi")? },
            "categorical" => ParamKind::Categorical {
                values: r
                    .values
                    .clone()
                    .ok_or_else(|| SpaceError::File(format!("parameter {n:?}: categorical needs `values`")))?,
            },
            "int_tuple" => ParamKind::IntTuple {
                lo: tuple_bound(&r.lo, r.length, n, "lo")?,
                hi: tuple_bound(&r.hi, r.length, n, "hi")?,
            },
            other => return Err(SpaceError::File(format!("parameter {n:?}: unknown kind {other:?}"))),
        };
        Ok(ParameterSpec { name: r.name, kind })
    }
}

impl From<ParameterSpec> for RawParam {
    fn from(p: ParameterSpec) -> Self {
        let mut raw = RawParam {
            name: p.name,
            kind: String::new(),
            lo: None,
            hi: None,
            log: None,
            values: None,
            length: None,
        };
        match p.kind {
            ParamKind::Continuous { lo, hi, log } => {
                raw.kind = "continuous".into();
                raw.lo = Some(Bound::Real(lo));
                raw.hi = Some(Bound::Real(hi));
                raw.log = Some(log);
            }
            ParamKind::Integer { lo, hi } => {
                raw.kind = "integer".into();
                raw.lo = Some(Bound::Int(lo));
                raw.hi = Some(Bound::Int(hi));
            }
            ParamKind::Categorical { values } => {
                raw.kind = "categorical".into();
                raw.values = Some(values);
            }
            ParamKind::IntTuple { lo, hi } => {
                raw.kind = "int_tuple".into();
                raw.lo = Some(Bound::List(lo));
                raw.hi = Some(Bound::List(hi));
            }
        }
        raw
    }
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        let classes = raw.classes.into_iter().map(ArchitectureClass::new).collect();
        let params = raw.params.into_iter().map(ParameterSpec::try_from).collect::<Result<Vec<_>, _>>()?;
        let overrides = raw
            .overrides
            .into_iter()
            .map(|(c, ps)| {
                let specs = ps.into_iter().map(ParameterSpec::try_from).collect::<Result<Vec<_>, _>>()?;
                Ok((ArchitectureClass::new(c), specs))
            })
            .collect::<Result<BTreeMap<_, _>, SpaceError>>()?;
        SearchSpace::with_overrides(classes, params, overrides)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(s: SearchSpace) -> Self {
        RawSpace {
            classes: s.classes.into_iter().map(|c| c.0).collect(),
            params: s.params.into_iter().map(RawParam::from).collect(),
            overrides: s
                .overrides
                .into_iter()
                .map(|(c, ps)| (c.0, ps.into_iter().map(RawParam::from).collect()))
                .collect(),
        }
    }
}

impl SearchSpace {
    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        toml::from_str(text).map_err(|e| SpaceError::File(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, SpaceError> {
        serde_json::from_str(text).map_err(|e| SpaceError::File(e.to_string()))
    }

    /// Loads a space file; `.json` is read as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpaceError::File(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}
