use stepsearch_core::curriculum::{ConditionTag, Footwear, Speed};

use crate::scores::{Label, ProbeId, ScoreRecord, ScoreSet};

pub fn set(genuine: &[f64], impostor: &[f64]) -> ScoreSet {
    let c = ConditionTag::new(Footwear::ST, Speed::W1);
    let rec = |k: usize, score: f64, label| ScoreRecord {
        probe_id: ProbeId(format!("p{k}")),
        claimed_id: "s".into(),
        score,
        label,
        condition: c,
        true_id: None,
    };
    let mut r: Vec<ScoreRecord> = genuine.iter().enumerate().map(|(k, &s)| rec(k, s, Label::Genuine)).collect();
    r.extend(impostor.iter().enumerate().map(|(k, &s)| rec(genuine.len() + k, s, Label::Impostor)));
    ScoreSet::new(r).unwrap()
}
