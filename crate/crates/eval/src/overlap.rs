//! Overlap of misclassified probes across models.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scores::{accepts, Label, ProbeId, ScoreSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: usize,
    pub b: usize,
    pub count: usize,
}

/// Probes misclassified by exactly the models in `members`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub members: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub sizes: Vec<usize>,
    pub pairwise: Vec<PairOverlap>,
    /// Probes misclassified by every model.
    pub common: BTreeSet<ProbeId>,
    /// Common probes that are impostor claims, i.e. false matches.
    pub common_false_matches: usize,
    /// Common probes that are genuine claims, i.e. false non-matches.
    pub common_false_non_matches: usize,
    /// Common probes with no known label.
    pub common_unlabeled: usize,
    /// Non-empty exclusive regions of the Venn diagram.
    pub regions: Vec<Region>,
}

/// Set algebra over per-model misclassified probe sets. `labels`, when given,
/// splits the common core by error kind.
pub fn misclassification_overlap(
    models: &[BTreeSet<ProbeId>],
    labels: Option<&BTreeMap<ProbeId, Label>>,
) -> OverlapReport {
    let mut pairwise = Vec::new();
    for a in 0..models.len() {
        for b in a + 1..models.len() {
            pairwise.push(PairOverlap { a, b, count: models[a].intersection(&models[b]).count() });
        }
    }
    let common: BTreeSet<ProbeId> = match models.split_first() {
        Some((first, rest)) => first.iter().filter(|p| rest.iter().all(|m| m.contains(*p))).cloned().collect(),
        None => BTreeSet::new(),
    };
    let (mut fm, mut fnm, mut unlabeled) = (0, 0, 0);
    for p in &common {
        match labels.and_then(|l| l.get(p)) {
            Some(Label::Impostor) => fm += 1,
            Some(Label::Genuine) => fnm += 1,
            None => unlabeled += 1,
        }
    }
    let mut by_members: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let all: BTreeSet<&ProbeId> = models.iter().flatten().collect();
    for p in all {
        let members: Vec<usize> = (0..models.len()).filter(|&m| models[m].contains(p)).collect();
        *by_members.entry(members).or_default() += 1;
    }
    OverlapReport {
        sizes: models.iter().map(BTreeSet::len).collect(),
        pairwise,
        common,
        common_false_matches: fm,
        common_false_non_matches: fnm,
        common_unlabeled: unlabeled,
        regions: by_members.into_iter().map(|(members, count)| Region { members, count }).collect(),
    }
}

/// Probes whose accept/reject decision at `threshold` disagrees with the label.
pub fn misclassified(s: &ScoreSet, threshold: f64) -> BTreeSet<ProbeId> {
    s.records()
        .iter()
        .filter(|r| accepts(r.score, threshold) != (r.label == Label::Genuine))
        .map(|r| r.probe_id.clone())
        .collect()
}
