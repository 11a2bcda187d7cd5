//! Labeled verification scores and threshold decisions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stepsearch_core::curriculum::ConditionTag;
use thiserror::Error;

use crate::embedding::SubjectId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbeId(pub String);

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProbeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Impostor,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genuine" => Ok(Label::Genuine),
            "impostor" => Ok(Label::Impostor),
            _ => Err(format!("label must be \"genuine\" or \"impostor\", found {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub probe_id: ProbeId,
    pub claimed_id: SubjectId,
    pub score: f64,
    pub label: Label,
    pub condition: ConditionTag,
    pub true_id: Option<SubjectId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("record {index} has score {score}, outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("threshold metrics need both classes; found {genuine} genuine and {impostor} impostor records")]
    SingleClass { genuine: usize, impostor: usize },
    #[error("threshold {0} is not finite")]
    NonFiniteThreshold(f64),
}

/// Verification scores with ground-truth labels. Every score lies in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    records: Vec<ScoreRecord>,
}

impl ScoreSet {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self, MetricError> {
        for (index, r) in records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.score) {
                return Err(MetricError::ScoreOutOfRange { index, score: r.score });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let g = self.records.iter().filter(|r| r.label == Label::Genuine).count();
        (g, self.records.len() - g)
    }

    /// Genuine and impostor scores, each sorted ascending. Errors unless both
    /// classes are present.
    pub fn split_sorted(&self) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
        let (mut g, mut i): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        for r in &self.records {
            match r.label {
                Label::Genuine => g.push(r.score),
                Label::Impostor => i.push(r.score),
            }
        }
        if g.is_empty() || i.is_empty() {
            return Err(MetricError::SingleClass { genuine: g.len(), impostor: i.len() });
        }
        g.sort_by(f64::total_cmp);
        i.sort_by(f64::total_cmp);
        Ok((g, i))
    }
}

/// Accept iff `score >= threshold`.
pub fn accepts(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Error and accuracy rates at one threshold. All rates are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fmr: f64,
    pub fnmr: f64,
    pub acc: f64,
    pub bacc: f64,
    pub genuine: usize,
    pub impostor: usize,
    pub false_matches: usize,
    pub false_non_matches: usize,
}

impl Rates {
    /// Rates from error counts. BACC is `100 - (FMR + FNMR) / 2` exactly.
    pub fn from_counts(genuine: usize, impostor: usize, false_non_matches: usize, false_matches: usize) -> Self {
        let fmr = 100.0 * false_matches as f64 / impostor as f64;
        let fnmr = 100.0 * false_non_matches as f64 / genuine as f64;
        let wrong = (false_matches + false_non_matches) as f64;
        Self {
            fmr,
            fnmr,
            acc: 100.0 - 100.0 * wrong / (genuine + impostor) as f64,
            bacc: 100.0 - (fmr + fnmr) / 2.0,
            genuine,
            impostor,
            false_matches,
            false_non_matches,
        }
    }
}

/// ACC and BACC implied by FNMR and FMR percentages for a probe set with the
/// given class counts.
pub fn accuracy_from_rates(fnmr: f64, fmr: f64, genuine: usize, impostor: usize) -> (f64, f64) {
    let (g, i) = (genuine as f64, impostor as f64);
    (100.0 - (g * fnmr + i * fmr) / (g + i), 100.0 - (fmr + fnmr) / 2.0)
}

pub fn rates_at_threshold(s: &ScoreSet, t: f64) -> Result<Rates, MetricError> {
    if !t.is_finite() {
        return Err(MetricError::NonFiniteThreshold(t));
    }
    let (mut g, mut i, mut fnm, mut fm) = (0, 0, 0, 0);
    for r in &s.records {
        match r.label {
            Label::Genuine => {
                g += 1;
                fnm += usize::from(!accepts(r.score, t));
            }
            Label::Impostor => {
                i += 1;
                fm += usize::from(accepts(r.score, t));
            }
        }
    }
    if g == 0 || i == 0 {
        return Err(MetricError::SingleClass { genuine: g, impostor: i });
    }
    Ok(Rates::from_counts(g, i, fnm, fm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::set;

    #[test]
    fn separable_threshold_is_perfect() {
        let r = rates_at_threshold(&set(&[0.9, 0.8], &[0.1, 0.2]), 0.5).unwrap();
        assert_eq!((r.fmr, r.fnmr, r.acc, r.bacc), (0.0, 0.0, 100.0, 100.0));
    }

    #[test]
    fn threshold_equal_to_score_accepts() {
        let r = rates_at_threshold(&set(&[0.5], &[0.5]), 0.5).unwrap();
        assert_eq!((r.fnmr, r.fmr), (0.0, 100.0));
    }

    #[test]
    fn rejects_out_of_range_and_single_class() {
        let mut bad = set(&[0.9], &[0.1]).records().to_vec();
        bad[1].score = 1.5;
        assert_eq!(ScoreSet::new(bad), Err(MetricError::ScoreOutOfRange { index: 1, score: 1.5 }));
        assert_eq!(
            rates_at_threshold(&set(&[0.9], &[]), 0.5),
            Err(MetricError::SingleClass { genuine: 1, impostor: 0 })
        );
    }

    #[test]
    fn counts_and_rates_agree() {
        let r = Rates::from_counts(3000, 7000, 300, 849);
        let (acc, bacc) = accuracy_from_rates(r.fnmr, r.fmr, 3000, 7000);
        assert!((r.acc - acc).abs() < 1e-12 && r.bacc == bacc);
        assert!((r.acc - 88.51).abs() < 1e-9);
    }
}
