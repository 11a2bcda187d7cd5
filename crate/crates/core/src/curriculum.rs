//! Walking-condition vocabulary and staged data curricula.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Footwear {
    /// Barefoot or sock-foot.
    BF,
    /// Shared standard sneakers.
    ST,
    /// First pair of personal shoes.
    P1,
    /// Second pair of personal shoes.
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Speed {
    /// Preferred speed.
    W1,
    /// Slowing to a stop.
    W2,
    /// Slow.
    W3,
    /// Fast.
    W4,
}

impl Footwear {
    pub const ALL: [Footwear; 4] = [Footwear::BF, Footwear::ST, Footwear::P1, Footwear::P2];
}

impl Speed {
    pub const ALL: [Speed; 4] = [Speed::W1, Speed::W2, Speed::W3, Speed::W4];
}

impl FromStr for Footwear {
    type Err = ConditionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BF" => Ok(Footwear::BF),
            "ST" => Ok(Footwear::ST),
            "P1" => Ok(Footwear::P1),
            "P2" => Ok(Footwear::P2),
            _ => Err(ConditionParseError(s.to_string())),
        }
    }
}

impl FromStr for Speed {
    type Err = ConditionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "W1" => Ok(Speed::W1),
            "W2" => Ok(Speed::W2),
            "W3" => Ok(Speed::W3),
            "W4" => Ok(Speed::W4),
            _ => Err(ConditionParseError(s.to_string())),
        }
    }
}

impl fmt::Display for Footwear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown condition {0:?}")]
pub struct ConditionParseError(String);

/// A (footwear, speed) pair. Serialized as `"BF-W1"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConditionTag {
    pub footwear: Footwear,
    pub speed: Speed,
}

impl ConditionTag {
    pub const COUNT: usize = 16;

    pub fn new(footwear: Footwear, speed: Speed) -> Self {
        Self { footwear, speed }
    }

    fn index(self) -> usize {
        self.footwear as usize * 4 + self.speed as usize
    }

    fn from_index(i: usize) -> Self {
        Self { footwear: Footwear::ALL[i / 4], speed: Speed::ALL[i % 4] }
    }

    pub fn all() -> impl Iterator<Item = ConditionTag> {
        (0..Self::COUNT).map(Self::from_index)
    }
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.footwear, self.speed)
    }
}

impl FromStr for ConditionTag {
    type Err = ConditionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (fw, sp) = s.split_once('-').ok_or_else(|| ConditionParseError(s.to_string()))?;
        Ok(Self { footwear: fw.parse()?, speed: sp.parse()? })
    }
}

impl TryFrom<String> for ConditionTag {
    type Error = ConditionParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ConditionTag> for String {
    fn from(t: ConditionTag) -> Self {
        t.to_string()
    }
}

/// Set of condition tags (a 16-bit mask). Serialized as a sorted tag list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<ConditionTag>", into = "Vec<ConditionTag>")]
pub struct ConditionSet(u16);

impl ConditionSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full() -> Self {
        Self(u16::MAX)
    }

    pub fn contains(self, t: ConditionTag) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn insert(&mut self, t: ConditionTag) {
        self.0 |= 1 << t.index();
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Fraction of all sixteen conditions present.
    pub fn coverage(self) -> f64 {
        self.len() as f64 / ConditionTag::COUNT as f64
    }

    pub fn iter(self) -> impl Iterator<Item = ConditionTag> {
        ConditionTag::all().filter(move |t| self.contains(*t))
    }

    /// Tags not in the set.
    pub fn missing(self) -> impl Iterator<Item = ConditionTag> {
        ConditionTag::all().filter(move |t| !self.contains(*t))
    }

    /// Draws a uniformly random tag not yet in the set.
    pub fn random_missing(self, rng: &mut impl Rng) -> Option<ConditionTag> {
        let missing: Vec<_> = self.missing().collect();
        if missing.is_empty() {
            None
        } else {
            Some(missing[rng.random_range(0..missing.len())])
        }
    }
}

impl FromIterator<ConditionTag> for ConditionSet {
    fn from_iter<I: IntoIterator<Item = ConditionTag>>(iter: I) -> Self {
        let mut s = Self::empty();
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl From<Vec<ConditionTag>> for ConditionSet {
    fn from(v: Vec<ConditionTag>) -> Self {
        v.into_iter().collect()
    }
}

impl From<ConditionSet> for Vec<ConditionTag> {
    fn from(s: ConditionSet) -> Self {
        s.iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub start_epoch: u32,
    pub conditions: ConditionSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurriculumError {
    #[error("curriculum has no stages")]
    Empty,
    #[error("first stage must start at epoch 1, found {0}")]
    FirstStart(u32),
    #[error("stage {0} does not start after the previous stage")]
    NotIncreasing(usize),
    #[error("stage {0} has an empty condition set")]
    EmptyConditions(usize),
    #[error("stage {0} drops conditions of the previous stage")]
    NotNested(usize),
    #[error("last stage starts at epoch {start}, which is not before the total of {total} epochs")]
    TooLate { start: u32, total: u32 },
    #[error("a curriculum needs at least 2 total epochs, got {0}")]
    TooShort(u32),
}

/// When to expand the training data: stages start at strictly increasing
/// epochs (the first at epoch 1) and each stage's condition set contains the
/// previous one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurriculumSchedule {
    stages: Vec<Stage>,
}

impl CurriculumSchedule {
    pub fn new(stages: Vec<Stage>, total_epochs: u32) -> Result<Self, CurriculumError> {
        let s = Self { stages };
        s.validate(total_epochs)?;
        Ok(s)
    }

    /// Single stage with every condition from the first epoch.
    pub fn full_data() -> Self {
        Self { stages: vec![Stage { start_epoch: 1, conditions: ConditionSet::full() }] }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn validate(&self, total_epochs: u32) -> Result<(), CurriculumError> {
        if total_epochs < 2 {
            return Err(CurriculumError::TooShort(total_epochs));
        }
        let first = self.stages.first().ok_or(CurriculumError::Empty)?;
        if first.start_epoch != 1 {
            return Err(CurriculumError::FirstStart(first.start_epoch));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.conditions.is_empty() {
                return Err(CurriculumError::EmptyConditions(i));
            }
            if i > 0 {
                let prev = &self.stages[i - 1];
                if s.start_epoch <= prev.start_epoch {
                    return Err(CurriculumError::NotIncreasing(i));
                }
                if !prev.conditions.is_subset(s.conditions) {
                    return Err(CurriculumError::NotNested(i));
                }
            }
        }
        let last = self.stages.last().expect("non-empty").start_epoch;
        if last >= total_epochs {
            return Err(CurriculumError::TooLate { start: last, total: total_epochs });
        }
        Ok(())
    }

    /// Restores every invariant: stages sorted by start, the first moved to
    /// epoch 1, later starts bumped to stay strictly increasing, stages that no
    /// longer fit before `total_epochs` dropped, and condition sets replaced by
    /// running unions so they nest.
    pub fn repair(mut stages: Vec<Stage>, total_epochs: u32) -> Self {
        let total_epochs = total_epochs.max(2);
        if stages.is_empty() {
            return Self::full_data();
        }
        stages.sort_by_key(|s| s.start_epoch);
        stages[0].start_epoch = 1;
        for i in 1..stages.len() {
            stages[i].start_epoch = stages[i].start_epoch.max(stages[i - 1].start_epoch + 1);
        }
        stages.retain(|s| s.start_epoch < total_epochs);
        let mut acc = ConditionSet::empty();
        for s in &mut stages {
            acc = acc.union(s.conditions);
            s.conditions = acc;
        }
        if stages[0].conditions.is_empty() {
            let first = ConditionTag::from_index(0);
            for s in &mut stages {
                s.conditions.insert(first);
            }
        }
        Self { stages }
    }

    /// Conditions in use during `epoch` (1-based).
    pub fn active_at(&self, epoch: u32) -> ConditionSet {
        self.stages
            .iter()
            .take_while(|s| s.start_epoch <= epoch)
            .last()
            .map(|s| s.conditions)
            .unwrap_or_default()
    }

    pub fn final_conditions(&self) -> ConditionSet {
        self.stages.last().map(|s| s.conditions).unwrap_or_default()
    }

    /// Epochs spent before the second stage opens (0 for a single stage).
    pub fn warmup_epochs(&self) -> u32 {
        self.stages.get(1).map(|s| s.start_epoch - 1).unwrap_or(0)
    }
}
