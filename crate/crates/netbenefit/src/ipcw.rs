//! Inverse probability-of-censoring weights for cost-model fitting.
//!
//! For each subject whose cost is fully observed, the weight is the inverse
//! of the estimated probability `G(s*)` that censoring occurs no earlier
//! than the subject's horizon-limited time `s* = min(time, tau)`. Subjects
//! with censored costs carry no weight (the cost model never sees them).
//!
//! The censoring-time model treats a censored cost as the event. Two model
//! routes are supported: a stratified Kaplan-Meier fit evaluated as the
//! product-limit left limit, and a stratified Cox fit evaluated as
//! `exp(-exp(coef' w) * H0(s*-))` with the Breslow baseline. Both use the
//! strict comparison `s* > censoring time`, so ties contribute no hazard.

use thiserror::Error;

use crate::domain::ValidatedDataset;
use crate::frame::Frame;
use crate::models::{CoxFit, DesignMatrix, KaplanMeierFit};

/// Positivity floor: an estimated observation probability below this value
/// is an error rather than a silently truncated weight.
pub const MIN_OBSERVATION_PROBABILITY: f64 = 1e-8;

/// Fitted censoring-time model plus the per-observation inputs needed to
/// evaluate it.
#[derive(Debug, Clone)]
pub struct CensoringModel {
    pub fit: CensoringFit,
    /// Stratum index per observation.
    pub strata: Vec<usize>,
    /// Covariate matrix used by the Cox route (empty for Kaplan-Meier).
    pub covariates: DesignMatrix,
}

#[derive(Debug, Clone)]
pub enum CensoringFit {
    KaplanMeier(KaplanMeierFit),
    Cox(CoxFit),
}

/// Per-observation censoring weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringWeights {
    /// `Some(1 / G(s*))` where the cost is observed, `None` where censored.
    pub weights: Vec<Option<f64>>,
    /// The estimated observation probabilities `G(s*)`, aligned with
    /// `weights`.
    pub observation_probabilities: Vec<Option<f64>>,
    pub tau: f64,
}

impl CensoringWeights {
    /// Weight vector over all observations with zeros where the cost is
    /// censored, ready to use as case weights for the cost model.
    pub fn as_case_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.unwrap_or(0.0)).collect()
    }

    /// Unit weights on the cost-observed rows (diagnostic reference).
    pub fn unit(cost_censored: &[bool], tau: f64) -> Self {
        CensoringWeights {
            weights: cost_censored.iter().map(|&c| (!c).then_some(1.0)).collect(),
            observation_probabilities: cost_censored.iter().map(|&c| (!c).then_some(1.0)).collect(),
            tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpcwError {
    #[error(
        "ZERO_G: estimated observation probability {probability:.3e} for row {row} is below \
         {MIN_OBSERVATION_PROBABILITY:.0e} (censoring positivity violated)"
    )]
    ZeroG { row: usize, probability: f64 },
    #[error("STRATUM_MISMATCH: {0}")]
    StratumMismatch(String),
}

/// Computes `1 / G(s*)` for every cost-observed subject from a fitted
/// censoring model.
pub fn compute_censoring_weights(
    dataset: &ValidatedDataset,
    model: &CensoringModel,
) -> Result<CensoringWeights, IpcwError> {
    let frame = Frame::from_dataset(dataset);
    compute_censoring_weights_frame(&frame, model)
}

pub(crate) fn compute_censoring_weights_frame(
    frame: &Frame,
    model: &CensoringModel,
) -> Result<CensoringWeights, IpcwError> {
    let n = frame.n;
    if model.strata.len() != n {
        return Err(IpcwError::StratumMismatch(format!(
            "{} stratum labels for {n} observations",
            model.strata.len()
        )));
    }
    let n_strata = match &model.fit {
        CensoringFit::KaplanMeier(km) => km.n_strata(),
        CensoringFit::Cox(cox) => cox.n_strata(),
    };
    if let Some(&bad) = model.strata.iter().find(|&&s| s >= n_strata) {
        return Err(IpcwError::StratumMismatch(format!(
            "stratum {bad} outside the fitted range 0..{n_strata}"
        )));
    }
    let mut weights = vec![None; n];
    let mut probabilities = vec![None; n];
    for i in 0..n {
        if frame.cost_censored[i] {
            continue;
        }
        let s_star = frame.horizon_time(i);
        let g = match &model.fit {
            CensoringFit::KaplanMeier(km) => km.stratum(model.strata[i]).survival_before(s_star),
            CensoringFit::Cox(cox) => {
                cox.survival_before(model.strata[i], s_star, model.covariates.row(i))
            }
        };
        if g < MIN_OBSERVATION_PROBABILITY {
            return Err(IpcwError::ZeroG { row: i, probability: g });
        }
        debug_assert!(g <= 1.0 + 1e-12);
        probabilities[i] = Some(g);
        weights[i] = Some(1.0 / g);
    }
    Ok(CensoringWeights { weights, observation_probabilities: probabilities, tau: frame.tau })
}
