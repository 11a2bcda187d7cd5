//! Multi-fidelity Bayesian optimization with a transferred prior.
//!
//! One GP models performance over the encoded configuration plus one extra
//! input for fidelity. Observations from a cheaper proxy task are folded in
//! with inflated noise at their own fidelity coordinate, so they shape the
//! surrogate until target data outweighs them. Candidates are chosen by
//! expected improvement per unit cost across all rungs, and cheap-rung
//! results advance through successive halving.

mod acquisition;
mod gp;
mod halving;
mod search;

pub use acquisition::{cost_aware_acquisition, expected_improvement, normal_cdf, normal_pdf};
pub use gp::{GpError, GpSurrogate, Kernel, Observation, MIN_NOISE};
pub use halving::{promote, promote_indices, promotion_count, FidelitySchedule, HalvingError};
pub use search::{
    surrogate_encoding, timfbo_search, Incumbent, Pending, TimfboConfig, TimfboError, TimfboOutcome, TimfboState,
    TimfboTrial, TrialSource,
};

use serde::{Deserialize, Serialize};

/// Results from a cheaper stand-in task. Inputs use the same encoding as
/// the target surrogate without the fidelity coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyDataset {
    /// Fidelity coordinate the proxy observations are placed at.
    pub fidelity: f64,
    pub points: Vec<ProxyPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Noise variance of a proxy observation under `discount`.
///
/// Chosen so the proxy's prior-to-posterior signal ratio is the target's
/// scaled by `discount`: `(sigma_f^2 + noise) = (sigma_f^2 + sigma_y^2) / d`.
/// At `d = 1` this is the ordinary noise.
pub fn proxy_noise(kernel: &Kernel, discount: f64) -> Result<f64, GpError> {
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(GpError::InvalidDiscount(discount));
    }
    let sf2 = kernel.signal_variance;
    Ok((kernel.effective_noise() + sf2) / discount - sf2)
}

/// Adds the proxy observations to `target`'s data and refits with the same
/// kernel.
pub fn transfer_init(target: &GpSurrogate, proxy: &ProxyDataset, discount: f64) -> Result<GpSurrogate, GpError> {
    let noise = proxy_noise(target.kernel(), discount)?;
    let d = target.dim();
    let mut obs = Vec::with_capacity(proxy.points.len() + target.observations().len());
    for p in &proxy.points {
        if p.x.len() + 1 != d {
            return Err(GpError::DimensionMismatch { expected: d, found: p.x.len() + 1 });
        }
        let mut x = p.x.clone();
        x.push(proxy.fidelity);
        obs.push(Observation { x, y: p.y, noise: Some(noise) });
    }
    obs.extend_from_slice(target.observations());
    GpSurrogate::fit(obs, target.kernel().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> Kernel {
        Kernel::isotropic(2, 0.3, 1.0, 1e-4)
    }

    #[test]
    fn full_discount_is_a_normal_observation() {
        let empty = GpSurrogate::fit(vec![], kernel()).unwrap();
        let proxy = ProxyDataset { fidelity: 1.0, points: vec![ProxyPoint { x: vec![0.3], y: 0.7 }] };
        let warm = transfer_init(&empty, &proxy, 1.0).unwrap();
        let plain = GpSurrogate::fit(vec![Observation::new(vec![0.3, 1.0], 0.7)], kernel()).unwrap();
        for q in [[0.3, 1.0], [0.6, 0.2]] {
            let (a, b) = (warm.posterior(&q).unwrap(), plain.posterior(&q).unwrap());
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_discount_leaves_target_posterior() {
        let target = GpSurrogate::fit(
            vec![Observation::new(vec![0.2, 1.0], 0.4), Observation::new(vec![0.8, 1.0], 0.9)],
            kernel(),
        )
        .unwrap();
        let pts: Vec<ProxyPoint> = (0..10).map(|i| ProxyPoint { x: vec![i as f64 / 9.0], y: 1.0 }).collect();
        let proxy = ProxyDataset { fidelity: 0.0, points: pts.clone() };
        let warm = transfer_init(&target, &proxy, 1e-6).unwrap();
        for p in &pts {
            let q = [p.x[0], 0.0];
            let (a, b) = (warm.posterior(&q).unwrap(), target.posterior(&q).unwrap());
            assert!((a.0 - b.0).abs() < 1e-3, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zero_discount_rejected() {
        let empty = GpSurrogate::fit(vec![], kernel()).unwrap();
        let proxy = ProxyDataset { fidelity: 0.0, points: vec![] };
        assert_eq!(transfer_init(&empty, &proxy, 0.0).unwrap_err(), GpError::InvalidDiscount(0.0));
    }
}
