use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::gp::GpError;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Expected improvement over `best` for maximization:
/// `(mu - best) Phi(z) + sigma phi(z)` with `z = (mu - best) / sigma`, and
/// `max(0, mu - best)` when `sigma = 0`.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gap = mean - best;
    if std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / std;
    (gap * normal_cdf(z) + std * normal_pdf(z)).max(0.0)
}

/// Improvement per unit of training cost.
pub fn cost_aware_acquisition(ei: f64, cost: f64) -> Result<f64, GpError> {
    if cost.is_nan() || cost <= 0.0 {
        return Err(GpError::NonPositiveCost(cost));
    }
    Ok(ei / cost)
}
