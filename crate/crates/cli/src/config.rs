//! Run configuration file.
//!
//! A file whose top level has `classes` is a bare search space and every
//! strategy runs with defaults. Otherwise it is a run configuration:
//!
//! ```toml
//! space = "space.toml"    # path relative to this file, or an inline table
//! budget = 30             # grm: episodes, timfbo: full trials, ecco: generations
//! proxy = "proxy.json"    # optional TI-MFBO warm-start observations
//!
//! [benchmark]             # synthetic trainer settings
//! kind = "bowl"           # bowl | seeded
//! noise = 0.0
//! seed = 0
//!
//! [trainer]               # external trainer instead of the benchmark
//! command = "python train.py"
//! timeout_secs = 3600
//!
//! [actions]               # GRM action grid
//! bins = 3
//! cap = 512
//!
//! [grm]                   # strategy settings; see each strategy's config
//! [timfbo]
//! [ecco]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stepsearch_core::ecco::EccoConfig;
use stepsearch_core::grm::GrmConfig;
use stepsearch_core::space::{SearchSpace, DEFAULT_ACTION_CAP};
use stepsearch_core::timfbo::TimfboConfig;
use stepsearch_core::trainer::CurriculumEffect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSource {
    Path(PathBuf),
    Inline(SearchSpace),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    /// Unit bowl centred in the encoded space; optimum value 1.
    #[default]
    Bowl,
    /// Per-class targets drawn from `seed`.
    Seeded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSettings {
    pub kind: BenchmarkKind,
    pub noise: f64,
    pub seed: u64,
    pub curriculum: CurriculumEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSettings {
    pub command: String,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSettings {
    /// Grid points per continuous axis.
    pub bins: usize,
    pub cap: usize,
}

impl Default for ActionSettings {
    fn default() -> Self {
        Self { bins: 3, cap: DEFAULT_ACTION_CAP }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub space: Option<SpaceSource>,
    pub budget: Option<f64>,
    pub proxy: Option<PathBuf>,
    pub benchmark: BenchmarkSettings,
    pub trainer: Option<TrainerSettings>,
    pub actions: ActionSettings,
    pub grm: GrmConfig,
    pub timfbo: TimfboConfig,
    pub ecco: EccoConfig,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

impl RunConfig {
    /// Reads a run configuration or a bare space file. Relative paths inside
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let value: serde_json::Value = if is_json(path) {
            serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?
        } else {
            let table: toml::Table = toml::from_str(&text).with_context(|| format!("{} is not valid TOML", path.display()))?;
            serde_json::to_value(table)?
        };
        let mut cfg = if value.get("classes").is_some() {
            let space: SearchSpace =
                serde_json::from_value(value).with_context(|| format!("invalid search space in {}", path.display()))?;
            RunConfig { space: Some(SpaceSource::Inline(space)), ..RunConfig::default() }
        } else {
            serde_json::from_value(value).with_context(|| format!("invalid run configuration in {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(SpaceSource::Path(p)) = &mut cfg.space {
            *p = base.join(&*p);
        }
        if let Some(p) = &mut cfg.proxy {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn resolve_space(&self) -> Result<Option<SearchSpace>> {
        match &self.space {
            None => Ok(None),
            Some(SpaceSource::Inline(s)) => Ok(Some(s.clone())),
            Some(SpaceSource::Path(p)) => {
                Ok(Some(SearchSpace::load(p).with_context(|| format!("cannot load search space {}", p.display()))?))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.budget {
            if !(b.is_finite() && b > 0.0) {
                bail!("budget must be positive, found {b}");
            }
        }
        if !(self.benchmark.noise.is_finite() && self.benchmark.noise >= 0.0) {
            bail!("benchmark noise must be non-negative");
        }
        if self.actions.bins == 0 || self.actions.cap == 0 {
            bail!("action bins and cap must be at least 1");
        }
        Ok(())
    }
}
