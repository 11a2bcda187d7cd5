use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trainer::FidelityLevel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HalvingError {
    #[error("schedule needs at least one rung")]
    NoRungs,
    #[error("eta must be at least 2, got {0}")]
    EtaTooSmall(usize),
    #[error("{rungs} rungs but {costs} costs")]
    CostCount { rungs: usize, costs: usize },
    #[error("rung costs must be positive and strictly increasing")]
    CostOrder,
    #[error("rung epoch budgets must be positive and non-decreasing")]
    EpochOrder,
    #[error("only the last rung may be the full-fidelity level")]
    TopRung,
    #[error("nothing to promote from an empty rung")]
    EmptyRung,
    #[error("rung {0} is the top rung")]
    PromoteFromTop(usize),
    #[error("rung {0} does not exist")]
    UnknownRung(usize),
}

/// Ordered fidelity rungs with their relative training costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct FidelitySchedule {
    rungs: Vec<FidelityLevel>,
    costs: Vec<f64>,
    eta: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    rungs: Vec<FidelityLevel>,
    costs: Vec<f64>,
    eta: usize,
}

impl TryFrom<RawSchedule> for FidelitySchedule {
    type Error = HalvingError;

    fn try_from(r: RawSchedule) -> Result<Self, HalvingError> {
        FidelitySchedule::new(r.rungs, r.costs, r.eta)
    }
}

impl From<FidelitySchedule> for RawSchedule {
    fn from(s: FidelitySchedule) -> Self {
        RawSchedule { rungs: s.rungs, costs: s.costs, eta: s.eta }
    }
}

impl FidelitySchedule {
    /// Rung indices and the `top` flag are normalized from the order given:
    /// the last rung is full fidelity.
    pub fn new(mut rungs: Vec<FidelityLevel>, costs: Vec<f64>, eta: usize) -> Result<Self, HalvingError> {
        if rungs.is_empty() {
            return Err(HalvingError::NoRungs);
        }
        if eta < 2 {
            return Err(HalvingError::EtaTooSmall(eta));
        }
        if costs.len() != rungs.len() {
            return Err(HalvingError::CostCount { rungs: rungs.len(), costs: costs.len() });
        }
        if costs.iter().any(|c| !(c.is_finite() && *c > 0.0)) || costs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HalvingError::CostOrder);
        }
        if rungs.iter().any(|r| r.epoch_budget == 0) || rungs.windows(2).any(|w| w[0].epoch_budget > w[1].epoch_budget) {
            return Err(HalvingError::EpochOrder);
        }
        let last = rungs.len() - 1;
        if rungs[..last].iter().any(|r| r.top) {
            return Err(HalvingError::TopRung);
        }
        for (i, r) in rungs.iter_mut().enumerate() {
            r.rung = i;
            r.top = i == last;
        }
        Ok(Self { rungs, costs, eta })
    }

    /// Geometric epoch ladder ending at `full_epochs`: rung `r` trains for
    /// `ceil(full_epochs / eta^(num_rungs - 1 - r))` epochs and costs its
    /// share of the full run. Rungs that round to the same epoch count are
    /// merged.
    pub fn geometric(full_epochs: u32, num_rungs: usize, eta: usize) -> Result<Self, HalvingError> {
        if num_rungs == 0 {
            return Err(HalvingError::NoRungs);
        }
        if eta < 2 {
            return Err(HalvingError::EtaTooSmall(eta));
        }
        if full_epochs == 0 {
            return Err(HalvingError::EpochOrder);
        }
        let mut epochs: Vec<u32> = (0..num_rungs)
            .map(|r| {
                let div = (eta as f64).powi((num_rungs - 1 - r) as i32);
                ((full_epochs as f64 / div).ceil() as u32).max(1)
            })
            .collect();
        epochs.dedup();
        let rungs = epochs.iter().map(|&e| FidelityLevel::partial(e)).collect();
        let costs = epochs.iter().map(|&e| e as f64 / full_epochs as f64).collect();
        Self::new(rungs, costs, eta)
    }

    pub fn rungs(&self) -> &[FidelityLevel] {
        &self.rungs
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn top(&self) -> usize {
        self.rungs.len() - 1
    }

    pub fn level(&self, rung: usize) -> FidelityLevel {
        self.rungs[rung]
    }

    pub fn cost(&self, rung: usize) -> f64 {
        self.costs[rung]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Surrogate input coordinate of a rung: its cost relative to the top
    /// rung, so full fidelity sits at 1.
    pub fn coordinate(&self, rung: usize) -> f64 {
        self.costs[rung] / self.costs[self.top()]
    }
}

/// Number of survivors of a rung of `n` results.
pub fn promotion_count(n: usize, eta: usize) -> usize {
    n.div_ceil(eta)
}

/// Indices of the `ceil(n / eta)` largest values. Ties go to the earlier
/// index; the output is sorted by rank.
pub fn promote_indices(ys: &[f64], eta: usize) -> Result<Vec<usize>, HalvingError> {
    if ys.is_empty() {
        return Err(HalvingError::EmptyRung);
    }
    if eta < 2 {
        return Err(HalvingError::EtaTooSmall(eta));
    }
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]));
    order.truncate(promotion_count(ys.len(), eta));
    Ok(order)
}

/// Items of rung `rung` that advance to the next rung, best first.
/// `results` must be in evaluation order.
pub fn promote<T: Clone>(results: &[(T, f64)], rung: usize, schedule: &FidelitySchedule) -> Result<Vec<T>, HalvingError> {
    if rung >= schedule.len() {
        return Err(HalvingError::UnknownRung(rung));
    }
    if rung == schedule.top() {
        return Err(HalvingError::PromoteFromTop(rung));
    }
    let ys: Vec<f64> = results.iter().map(|(_, y)| *y).collect();
    Ok(promote_indices(&ys, schedule.eta())?.into_iter().map(|i| results[i].0.clone()).collect())
}
