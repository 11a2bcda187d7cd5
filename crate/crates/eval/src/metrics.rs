//! Threshold sweeps: EER, FMR100, DET curves and stratified EER.
//!
//! Candidate thresholds are every distinct score plus one sentinel just above
//! the largest score, where nothing is accepted. At the lowest candidate
//! everything is accepted, so FMR starts at 100 and FNMR at 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scores::{rates_at_threshold, Label, MetricError, ScoreRecord, ScoreSet};

/// Impostor count below which FMR100 cannot resolve a 1% false match rate.
pub const FMR100_MIN_IMPOSTORS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

/// Operating points at every candidate threshold, ascending in threshold.
/// FMR is non-increasing and FNMR non-decreasing along the list, and
/// consecutive points always differ.
fn sweep(genuine: &[f64], impostor: &[f64]) -> Vec<DetPoint> {
    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);
    let top = genuine.last().unwrap().max(*impostor.last().unwrap());
    let mut out = Vec::with_capacity(genuine.len() + impostor.len() + 1);
    let (mut a, mut b) = (0, 0);
    loop {
        let t = match (genuine.get(a), impostor.get(b)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        out.push(DetPoint {
            threshold: t,
            fmr: 100.0 * (impostor.len() - b) as f64 / ni,
            fnmr: 100.0 * a as f64 / ng,
        });
        while a < genuine.len() && genuine[a] <= t {
            a += 1;
        }
        while b < impostor.len() && impostor[b] <= t {
            b += 1;
        }
    }
    out.push(DetPoint { threshold: top.next_up(), fmr: 0.0, fnmr: 100.0 });
    out
}

pub fn det_curve(s: &ScoreSet) -> Result<Vec<DetPoint>, MetricError> {
    let (g, i) = s.split_sorted()?;
    Ok(sweep(&g, &i))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    /// Percent.
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate at the first candidate threshold where FNMR reaches FMR.
/// Without an exact tie the rates and the threshold are interpolated linearly
/// between that point and the one before it.
pub fn eer_from_curve(curve: &[DetPoint]) -> Eer {
    let k = curve.iter().position(|p| p.fmr <= p.fnmr).expect("sentinel point has fmr 0 < fnmr 100");
    let hi = curve[k];
    if hi.fmr == hi.fnmr {
        return Eer { eer: hi.fmr, threshold: hi.threshold };
    }
    // The first point has fmr 100 > fnmr 0, so k >= 1.
    let lo = curve[k - 1];
    let (d_lo, d_hi) = (lo.fmr - lo.fnmr, hi.fmr - hi.fnmr);
    let alpha = d_lo / (d_lo - d_hi);
    Eer {
        eer: lo.fmr + alpha * (hi.fmr - lo.fmr),
        threshold: lo.threshold + alpha * (hi.threshold - lo.threshold),
    }
}

pub fn compute_eer(s: &ScoreSet) -> Result<Eer, MetricError> {
    Ok(eer_from_curve(&det_curve(s)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fmr100 {
    /// FNMR in percent at `threshold`.
    pub fnmr: f64,
    pub fmr: f64,
    pub threshold: f64,
    /// Fewer than [`FMR100_MIN_IMPOSTORS`] impostors: 1% is not resolvable.
    pub low_resolution: bool,
}

/// FNMR at the smallest candidate threshold whose FMR is at most 1%.
pub fn fmr100(s: &ScoreSet) -> Result<Fmr100, MetricError> {
    let (g, i) = s.split_sorted()?;
    Ok(fmr100_from_curve(&sweep(&g, &i), i.len()))
}

fn fmr100_from_curve(curve: &[DetPoint], impostors: usize) -> Fmr100 {
    let p = curve.iter().find(|p| p.fmr <= 1.0).expect("sentinel point has fmr 0");
    Fmr100 { fnmr: p.fnmr, fmr: p.fmr, threshold: p.threshold, low_resolution: impostors < FMR100_MIN_IMPOSTORS }
}

/// Threshold-free metrics plus the rates at a chosen decision threshold.
/// Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub fmr100: f64,
    pub fmr100_low_resolution: bool,
    pub acc: f64,
    pub bacc: f64,
    pub fnmr: f64,
    pub fmr: f64,
    pub threshold: f64,
    pub genuine: usize,
    pub impostor: usize,
    pub det_points: Vec<DetPoint>,
}

pub fn evaluate(s: &ScoreSet, threshold: f64) -> Result<MetricsReport, MetricError> {
    let rates = rates_at_threshold(s, threshold)?;
    let (g, i) = s.split_sorted()?;
    let curve = sweep(&g, &i);
    let eer = eer_from_curve(&curve);
    let f = fmr100_from_curve(&curve, i.len());
    Ok(MetricsReport {
        eer: eer.eer,
        eer_threshold: eer.threshold,
        fmr100: f.fnmr,
        fmr100_low_resolution: f.low_resolution,
        acc: rates.acc,
        bacc: rates.bacc,
        fnmr: rates.fnmr,
        fmr: rates.fmr,
        threshold,
        genuine: rates.genuine,
        impostor: rates.impostor,
        det_points: curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Footwear,
    Speed,
    Condition,
}

impl GroupBy {
    pub fn key(self, r: &ScoreRecord) -> String {
        match self {
            GroupBy::Footwear => r.condition.footwear.to_string(),
            GroupBy::Speed => r.condition.speed.to_string(),
            GroupBy::Condition => r.condition.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumEer {
    pub eer: f64,
    pub threshold: f64,
    pub genuine: usize,
    pub impostor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedEer {
    pub strata: BTreeMap<String, StratumEer>,
    /// Strata that hold only one class after stratification.
    pub omitted: Vec<String>,
}

/// Per-stratum EER. Each stratum keeps the genuine records whose condition
/// falls in it and the whole impostor pool. Strata seen only among impostors
/// have no genuine claims and are reported as omitted.
pub fn stratified_eer(s: &ScoreSet, group_by: GroupBy) -> Result<StratifiedEer, MetricError> {
    let (genuine, impostor): (Vec<&ScoreRecord>, Vec<&ScoreRecord>) =
        s.records().iter().partition(|r| r.label == Label::Genuine);
    let mut keys: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &genuine {
        keys.entry(group_by.key(r)).or_default().push(r.score);
    }
    let mut imp: Vec<f64> = impostor.iter().map(|r| r.score).collect();
    imp.sort_by(f64::total_cmp);
    let mut omitted: Vec<String> = impostor.iter().map(|r| group_by.key(r)).filter(|k| !keys.contains_key(k)).collect();
    let mut strata = BTreeMap::new();
    for (key, mut g) in keys {
        if imp.is_empty() {
            omitted.push(key);
            continue;
        }
        g.sort_by(f64::total_cmp);
        let e = eer_from_curve(&sweep(&g, &imp));
        strata.insert(key, StratumEer { eer: e.eer, threshold: e.threshold, genuine: g.len(), impostor: imp.len() });
    }
    omitted.sort();
    omitted.dedup();
    Ok(StratifiedEer { strata, omitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::set;

    #[test]
    fn separable_eer_is_zero() {
        let s = set(&[0.9, 0.8], &[0.1, 0.2]);
        let e = compute_eer(&s).unwrap();
        assert_eq!(e.eer, 0.0);
        assert_eq!(e.threshold, 0.8);
        assert_eq!(fmr100(&s).unwrap().fnmr, 0.0);
    }

    #[test]
    fn eer_at_exact_crossing() {
        let e = compute_eer(&set(&[0.9, 0.8, 0.3], &[0.4, 0.2, 0.1])).unwrap();
        assert!((e.eer - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.threshold, 0.4);
    }

    #[test]
    fn eer_interpolates_between_points() {
        // (fmr, fnmr) at t = 0.5 is (100, 50) and at t = 0.8 is (0, 50).
        let e = compute_eer(&set(&[0.2, 0.8], &[0.5])).unwrap();
        assert_eq!(e.eer, 50.0);
        assert!((e.threshold - 0.65).abs() < 1e-15);
    }

    #[test]
    fn separable_det_touches_origin() {
        let d = det_curve(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        let pairs: Vec<(f64, f64)> = d.iter().map(|p| (p.fmr, p.fnmr)).collect();
        assert_eq!(pairs, vec![(100.0, 0.0), (50.0, 0.0), (0.0, 0.0), (0.0, 50.0), (0.0, 100.0)]);
    }

    #[test]
    fn det_points_match_direct_rates() {
        let s = set(&[0.9, 0.5, 0.5, 0.3, 0.7], &[0.5, 0.1, 0.35, 0.3, 0.2, 0.6]);
        for p in det_curve(&s).unwrap() {
            let r = rates_at_threshold(&s, p.threshold).unwrap();
            assert_eq!((r.fmr, r.fnmr), (p.fmr, p.fnmr));
        }
    }

    #[test]
    fn fmr100_flags_small_impostor_pools() {
        assert!(fmr100(&set(&[0.9], &[0.1; 99])).unwrap().low_resolution);
        assert!(!fmr100(&set(&[0.9], &[0.1; 100])).unwrap().low_resolution);
    }

    #[test]
    fn single_stratum_equals_global() {
        let s = set(&[0.9, 0.8, 0.3], &[0.4, 0.2, 0.1]);
        let st = stratified_eer(&s, GroupBy::Condition).unwrap();
        assert_eq!(st.strata.len(), 1);
        assert_eq!(st.strata.values().next().unwrap().eer, compute_eer(&s).unwrap().eer);
        assert!(st.omitted.is_empty());
    }
}
