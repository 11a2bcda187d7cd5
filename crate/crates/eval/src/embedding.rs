//! Embedding similarity, claim-level match scores and cohort normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stepsearch_core::curriculum::ConditionTag;
use thiserror::Error;

/// References enrolled per foot side for every identity.
pub const REFERENCES_PER_SIDE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub String);

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl FromStr for Side {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(ScoringError::UnknownSide(s.to_string())),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("vectors have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector entry {0} is not finite")]
    NonFinite(usize),
    #[error("vector is empty")]
    Empty,
    #[error("side must be \"left\" or \"right\", found {0:?}")]
    UnknownSide(String),
    #[error("identity {0} is not enrolled")]
    UnknownIdentity(SubjectId),
    #[error("identity {id} has {left} left and {right} right references, expected {REFERENCES_PER_SIDE} of each")]
    ReferenceCount { id: SubjectId, left: usize, right: usize },
    #[error("cohort normalization needs at least 2 scores, found {0}")]
    CohortTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: SubjectId,
    pub side: Side,
    pub condition: ConditionTag,
    vector: Vec<f64>,
}

impl Embedding {
    pub fn new(id: SubjectId, side: Side, condition: ConditionTag, vector: Vec<f64>) -> Result<Self, ScoringError> {
        if vector.is_empty() {
            return Err(ScoringError::Empty);
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(ScoringError::NonFinite(i));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(ScoringError::ZeroNorm);
        }
        Ok(Self { id, side, condition, vector })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, ScoringError> {
    if a.len() != b.len() {
        return Err(ScoringError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ScoringError::ZeroNorm);
    }
    // Rounding can push |cos| a hair past 1.
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
struct Enrollment {
    left: Vec<Embedding>,
    right: Vec<Embedding>,
}

/// Enrolled references: exactly five left and five right embeddings per
/// identity, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGallery {
    dim: usize,
    identities: BTreeMap<SubjectId, Enrollment>,
}

impl ReferenceGallery {
    pub fn new(references: Vec<Embedding>) -> Result<Self, ScoringError> {
        let dim = references.first().ok_or(ScoringError::Empty)?.dim();
        let mut identities: BTreeMap<SubjectId, Enrollment> = BTreeMap::new();
        for e in references {
            if e.dim() != dim {
                return Err(ScoringError::DimensionMismatch(dim, e.dim()));
            }
            let slot = identities.entry(e.id.clone()).or_insert(Enrollment { left: vec![], right: vec![] });
            match e.side {
                Side::Left => slot.left.push(e),
                Side::Right => slot.right.push(e),
            }
        }
        for (id, en) in &identities {
            if en.left.len() != REFERENCES_PER_SIDE || en.right.len() != REFERENCES_PER_SIDE {
                return Err(ScoringError::ReferenceCount {
                    id: id.clone(),
                    left: en.left.len(),
                    right: en.right.len(),
                });
            }
        }
        Ok(Self { dim, identities })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn identities(&self) -> impl Iterator<Item = &SubjectId> {
        self.identities.keys()
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn references(&self, id: &SubjectId, side: Side) -> Result<&[Embedding], ScoringError> {
        let en = self.identities.get(id).ok_or_else(|| ScoringError::UnknownIdentity(id.clone()))?;
        Ok(match side {
            Side::Left => &en.left,
            Side::Right => &en.right,
        })
    }
}

/// Mean cosine similarity between the probe and the claimed identity's
/// references of the probe's side.
pub fn match_score(probe: &Embedding, gallery: &ReferenceGallery, claimed: &SubjectId) -> Result<f64, ScoringError> {
    let refs = gallery.references(claimed, probe.side)?;
    let mut sum = 0.0;
    for r in refs {
        sum += cosine_similarity(probe.vector(), r.vector())?;
    }
    Ok(sum / refs.len() as f64)
}

/// Raw match scores of the probe against every enrolled identity except the
/// claimed one, in identity order.
pub fn cohort_scores(
    probe: &Embedding,
    gallery: &ReferenceGallery,
    claimed: &SubjectId,
) -> Result<Vec<f64>, ScoringError> {
    gallery.identities().filter(|id| *id != claimed).map(|id| match_score(probe, gallery, id)).collect()
}

/// `(raw - mean) / std` against the cohort, with population std. A constant
/// cohort gives 0.
pub fn z_norm(raw: f64, cohort: &[f64]) -> Result<f64, ScoringError> {
    if cohort.len() < 2 {
        return Err(ScoringError::CohortTooSmall(cohort.len()));
    }
    let n = cohort.len() as f64;
    let mean = cohort.iter().sum::<f64>() / n;
    let var = cohort.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Ok(0.0);
    }
    Ok((raw - mean) / var.sqrt())
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Z-normalizes against the cohort, then squashes into [0, 1].
pub fn cohort_normalize(raw: f64, cohort: &[f64]) -> Result<f64, ScoringError> {
    Ok(logistic(z_norm(raw, cohort)?))
}

/// How a raw claim score is mapped into the [0, 1] submission range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Cosine rescaled linearly from [-1, 1].
    Linear,
    /// Cohort z-norm followed by a logistic squash.
    #[default]
    ZNorm,
}

pub fn claim_score(
    probe: &Embedding,
    gallery: &ReferenceGallery,
    claimed: &SubjectId,
    norm: Normalization,
) -> Result<f64, ScoringError> {
    let raw = match_score(probe, gallery, claimed)?;
    match norm {
        Normalization::Linear => Ok((raw + 1.0) / 2.0),
        Normalization::ZNorm => cohort_normalize(raw, &cohort_scores(probe, gallery, claimed)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stepsearch_core::curriculum::{Footwear, Speed};

    fn cond() -> ConditionTag {
        ConditionTag::new(Footwear::BF, Speed::W1)
    }

    fn emb(id: &str, side: Side, v: Vec<f64>) -> Embedding {
        Embedding::new(id.into(), side, cond(), v).unwrap()
    }

    fn unit(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    /// Identity `id` whose five references on each side are the basis
    /// vectors `offset..offset + 5`.
    fn enroll(id: &str, offset: usize, d: usize) -> Vec<Embedding> {
        [Side::Left, Side::Right]
            .into_iter()
            .flat_map(|s| (0..5).map(move |k| emb(id, s, unit(d, offset + k))))
            .collect()
    }

    #[test]
    fn cosine_basics() {
        let a = [0.3, -1.2, 4.0];
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 0.0]), Err(ScoringError::ZeroNorm));
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(ScoringError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn embedding_rejects_bad_vectors() {
        assert_eq!(Embedding::new("a".into(), Side::Left, cond(), vec![0.0, 0.0]), Err(ScoringError::ZeroNorm));
        assert_eq!(Embedding::new("a".into(), Side::Left, cond(), vec![1.0, f64::NAN]), Err(ScoringError::NonFinite(1)));
    }

    #[test]
    fn match_score_averages_same_side_references() {
        let g = ReferenceGallery::new(enroll("a", 0, 10)).unwrap();
        let probe = emb("p", Side::Left, unit(10, 2));
        assert!((match_score(&probe, &g, &"a".into()).unwrap() - 0.2).abs() < 1e-15);
        let orth = emb("p", Side::Right, unit(10, 7));
        assert_eq!(match_score(&orth, &g, &"a".into()).unwrap(), 0.0);
        assert_eq!(match_score(&probe, &g, &"zz".into()), Err(ScoringError::UnknownIdentity("zz".into())));
    }

    #[test]
    fn gallery_requires_five_per_side() {
        let mut refs = enroll("a", 0, 6);
        refs.pop();
        assert!(matches!(ReferenceGallery::new(refs), Err(ScoringError::ReferenceCount { left: 5, right: 4, .. })));
    }

    #[test]
    fn z_norm_degenerate_cases() {
        assert_eq!(z_norm(0.4, &[0.2, 0.6]).unwrap(), 0.0);
        assert_eq!(cohort_normalize(0.4, &[0.2, 0.6]).unwrap(), 0.5);
        assert_eq!(z_norm(9.0, &[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_eq!(z_norm(1.0, &[0.3]), Err(ScoringError::CohortTooSmall(1)));
    }

    #[test]
    fn cohort_excludes_claimed_identity() {
        let mut refs = enroll("a", 0, 15);
        refs.extend(enroll("b", 5, 15));
        refs.extend(enroll("c", 10, 15));
        let g = ReferenceGallery::new(refs).unwrap();
        let probe = emb("p", Side::Left, unit(15, 6));
        let c = cohort_scores(&probe, &g, &"a".into()).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0] - 0.2).abs() < 1e-15 && c[1] == 0.0);
        let s = claim_score(&probe, &g, &"b".into(), Normalization::ZNorm).unwrap();
        // Cohort {a, c} is constant zero, so z collapses to 0.
        assert_eq!(s, 0.5);
        assert!((claim_score(&probe, &g, &"b".into(), Normalization::Linear).unwrap() - 0.6).abs() < 1e-15);
    }
}
