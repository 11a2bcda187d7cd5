use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TrainingLog;

pub const FEATURE_DIM: usize = 6;

/// Summary of training dynamics, in fixed order:
///
/// | idx | feature |
/// |-----|---------|
/// | 0 | bias, always 1 |
/// | 1 | first-epoch loss |
/// | 2 | last-epoch loss |
/// | 3 | mean per-epoch loss delta |
/// | 4 | least-squares slope of ln(loss) against epoch position |
/// | 5 | population variance of the last min(3, n) batch-loss variances |
///
/// Epochs enter by position in the log, so renumbering epochs while keeping
/// their order leaves the vector unchanged. Features 3 and 4 are 0 with fewer
/// than two epochs; feature 4 skips non-positive losses and is 0 if fewer than
/// two positive losses remain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DynamicsFeatures(pub [f64; FEATURE_DIM]);

impl DynamicsFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("cannot extract features from an empty training log")]
    EmptyLog,
}

pub fn extract_dynamics_features(log: &TrainingLog) -> Result<DynamicsFeatures, FeatureError> {
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
    let n = losses.len();
    if n == 0 {
        return Err(FeatureError::EmptyLog);
    }
    let first = losses[0];
    let last = losses[n - 1];
    let delta = if n < 2 { 0.0 } else { (last - first) / (n - 1) as f64 };

    let pts: Vec<(f64, f64)> =
        losses.iter().enumerate().filter(|(_, l)| **l > 0.0).map(|(i, l)| ((i + 1) as f64, l.ln())).collect();
    let slope = ls_slope(&pts);

    let tail: Vec<f64> = log.epochs[n - n.min(3)..].iter().map(|e| e.batch_loss_variance).collect();
    // Shifted by the first value so a constant tail gives exactly 0.
    let k = tail.len() as f64;
    let shifted: Vec<f64> = tail.iter().map(|v| v - tail[0]).collect();
    let mean = shifted.iter().sum::<f64>() / k;
    let spread = shifted.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / k;

    Ok(DynamicsFeatures([1.0, first, last, delta, slope, spread]))
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::EpochRecord;

    fn log(losses: &[f64], vars: &[f64]) -> TrainingLog {
        let epochs = losses
            .iter()
            .zip(vars)
            .enumerate()
            .map(|(i, (l, v))| EpochRecord {
                epoch: i as u32 + 1,
                train_loss: *l,
                batch_loss_variance: *v,
                val_metric: None,
            })
            .collect();
        TrainingLog { budget: losses.len() as u32, epochs }
    }

    #[test]
    fn single_epoch() {
        let f = extract_dynamics_features(&log(&[2.0], &[0.1])).unwrap();
        assert_eq!(f.0, [1.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flat_curve() {
        let f = extract_dynamics_features(&log(&[1.0; 5], &[0.2; 5])).unwrap();
        assert_eq!(f.0[3], 0.0);
        assert_eq!(f.0[4], 0.0);
        assert_eq!(f.0[5], 0.0);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert_eq!(extract_dynamics_features(&log(&[], &[])), Err(FeatureError::EmptyLog));
    }

    #[test]
    fn zero_losses_are_skipped_in_slope() {
        let f = extract_dynamics_features(&log(&[0.0, 1.0, 0.0], &[0.0; 3])).unwrap();
        assert_eq!(f.0[4], 0.0);
        let g = extract_dynamics_features(&log(&[1.0, 0.0, (-1.0f64).exp()], &[0.0; 3])).unwrap();
        assert!((g.0[4] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn terminal_variance_uses_last_three() {
        let f = extract_dynamics_features(&log(&[1.0; 5], &[9.0, 9.0, 1.0, 2.0, 3.0])).unwrap();
        assert!((f.0[5] - 2.0 / 3.0).abs() < 1e-15);
    }
}
