//! Monte-Carlo standardization: potential-outcome draws per arm over the
//! empirical covariate distribution, and the curves computed from them.
//!
//! The estimation pipeline is
//!
//! 1. fit the censoring-time model and form inverse
//!    probability-of-censoring weights,
//! 2. fit the survival model (Weibull AFT on the censored likelihood) and
//!    the cost model (weighted log-normal or two-part),
//! 3. for each arm, draw covariate rows from the empirical distribution,
//!    survival times from the fitted survival model, and costs from the
//!    fitted cost model conditional on the drawn survival,
//! 4. rank the pooled individual net benefits per willingness-to-pay value
//!    to obtain the net benefit separation, and average the draws for the
//!    net monetary benefit.
//!
//! Draws are generated in fixed-size blocks with per-block random streams,
//! so results are bit-identical for any worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CurvePoint, ValidatedDataset, WtpGrid};
use crate::frame::Frame;
use crate::ipcw::{
    compute_censoring_weights_frame, CensoringFit, CensoringModel, CensoringWeights, IpcwError,
};
use crate::models::{
    fit_kaplan_meier, fit_lognormal_cost, fit_stratified_cox, fit_two_part_cost, fit_weibull_aft,
    sample_cost_draw, ConvergenceInfo, CostModelFit, CostVariant, DesignMatrix, ModelError,
    WeibullAftFit,
};
use crate::rankstats::{nbs_two_sample, RankError};
use crate::rng::stream_rng;

/// Default number of Monte-Carlo draws per arm.
pub const DEFAULT_DRAWS: usize = 10_000;

/// Draws per random block; fixed so the draw stream does not depend on the
/// parallel schedule.
const DRAW_BLOCK: usize = 4096;

/// Which censoring-time model backs the inverse-probability weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringModelKind {
    KaplanMeier,
    Cox,
}

/// Model specification for an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// No model fitting: the empirical estimator on fully observed data
    /// (randomized, censoring-free designs).
    Unadjusted,
    /// The standardization + weighting pipeline.
    Adjusted(AdjustedSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedSpec {
    /// Covariates of the survival model (default: treatment only).
    #[serde(default)]
    pub survival_covariates: Vec<String>,
    /// Covariates of the cost model mean (besides treatment).
    #[serde(default)]
    pub cost_covariates: Vec<String>,
    /// Include the survival value `min(time, tau)` as a cost-model term and
    /// condition cost draws on the drawn survival.
    #[serde(default)]
    pub cost_survival_term: bool,
    pub cost_variant: CostVariant,
    pub censoring_model: CensoringModelKind,
    /// Discrete columns defining censoring-model strata.
    #[serde(default)]
    pub censoring_strata: Vec<String>,
    /// Censoring covariates (Cox model only).
    #[serde(default)]
    pub censoring_covariates: Vec<String>,
    /// Reuse one covariate draw sequence for both arms (variance-reduction
    /// experiments); default draws fresh covariates per arm.
    #[serde(default)]
    pub paired_covariate_draws: bool,
}

/// Pipeline failure with the stage that produced it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("config: {0}")]
    Config(String),
    #[error("fit.{stage}: {source}")]
    Fit { stage: &'static str, source: ModelError },
    #[error("weights: {0}")]
    Weights(#[from] IpcwError),
    #[error("rank: {0}")]
    Rank(#[from] RankError),
    #[error(
        "unadjusted estimation requires fully observed outcomes and costs \
         ({censored} censored rows present)"
    )]
    UnadjustedIncomplete { censored: usize },
    #[error("bootstrap: {failed} of {attempted} replicates failed (ceiling 5%); first: {first}")]
    TooManyReplicateFailures { failed: usize, attempted: usize, first: String },
}

fn fit_err(stage: &'static str) -> impl Fn(ModelError) -> EstimationError {
    move |source| EstimationError::Fit { stage, source }
}

/// Empirical covariate distribution: uniform resampling of observed rows.
#[derive(Debug, Clone)]
pub struct EmpiricalCovariateDistribution {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl EmpiricalCovariateDistribution {
    pub fn from_dataset(dataset: &ValidatedDataset) -> Self {
        Self::from_frame(&Frame::from_dataset(dataset))
    }

    pub(crate) fn from_frame(frame: &Frame) -> Self {
        assert!(frame.n > 0);
        EmpiricalCovariateDistribution {
            data: frame.covariates.clone(),
            n_rows: frame.n,
            n_cols: frame.n_cov,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.n_rows)
    }
}

/// Simulated potential outcomes for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawArm {
    pub survival: Vec<f64>,
    pub cost: Vec<f64>,
}

/// Potential-outcome draws for both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDrawSet {
    pub control: DrawArm,
    pub treated: DrawArm,
    /// Draws per arm.
    pub k: usize,
    /// Seed that generated the draws.
    pub seed: u64,
}

impl PotentialDrawSet {
    pub fn arm(&self, arm: u8) -> &DrawArm {
        if arm == 0 {
            &self.control
        } else {
            &self.treated
        }
    }
}

/// Everything standardization needs from the fitting stage.
pub struct StandardizationInputs<'a> {
    pub survival: &'a WeibullAftFit,
    pub cost: &'a CostModelFit,
    pub covariates: &'a EmpiricalCovariateDistribution,
    /// Columns of a covariate row consumed by the survival model.
    pub survival_columns: &'a [usize],
    /// Columns consumed by the cost model.
    pub cost_columns: &'a [usize],
    /// Cost accrual horizon; cost draws condition on `min(survival, tau)`.
    pub tau: f64,
    /// Shared covariate draw sequence across arms.
    pub paired_covariate_draws: bool,
}

const STREAM_COVARIATE: u64 = 1 << 56;
const STREAM_OUTCOME: u64 = 2 << 56;
const SHARED_ARM: u64 = 0xff << 48;

/// Generates `k` potential-outcome pairs per arm from the fitted models.
///
/// Deterministic in `seed`, independent of worker count: block `b` of arm
/// `a` always consumes streams derived from `(seed, a, b)`.
pub fn standardized_draws(inputs: &StandardizationInputs, k: usize, seed: u64) -> PotentialDrawSet {
    assert!(k >= 1, "at least one draw per arm");
    let n_blocks = k.div_ceil(DRAW_BLOCK);
    let jobs: Vec<(u8, usize)> =
        (0..2u8).flat_map(|arm| (0..n_blocks).map(move |b| (arm, b))).collect();
    let blocks: Vec<(u8, Vec<f64>, Vec<f64>)> = jobs
        .into_par_iter()
        .map(|(arm, block)| {
            let lo = block * DRAW_BLOCK;
            let hi = (lo + DRAW_BLOCK).min(k);
            let cov_arm_bits = if inputs.paired_covariate_draws {
                SHARED_ARM
            } else {
                (arm as u64) << 48
            };
            let mut cov_rng =
                stream_rng(seed, STREAM_COVARIATE | cov_arm_bits | block as u64);
            let mut out_rng =
                stream_rng(seed, STREAM_OUTCOME | ((arm as u64) << 48) | block as u64);
            let mut survival = Vec::with_capacity(hi - lo);
            let mut cost = Vec::with_capacity(hi - lo);
            let mut surv_cov = vec![0.0; inputs.survival_columns.len()];
            let mut cost_cov = vec![0.0; inputs.cost_columns.len()];
            for _ in lo..hi {
                let row = inputs.covariates.row(inputs.covariates.sample_index(&mut cov_rng));
                for (dst, &c) in surv_cov.iter_mut().zip(inputs.survival_columns) {
                    *dst = row[c];
                }
                for (dst, &c) in cost_cov.iter_mut().zip(inputs.cost_columns) {
                    *dst = row[c];
                }
                let u = 1.0 - out_rng.random::<f64>();
                let s = inputs.survival.draw_from_uniform(&surv_cov, arm, u);
                let y = sample_cost_draw(inputs.cost, &cost_cov, arm, s.min(inputs.tau), &mut out_rng);
                survival.push(s);
                cost.push(y);
            }
            (arm, survival, cost)
        })
        .collect();

    let mut control = DrawArm { survival: Vec::with_capacity(k), cost: Vec::with_capacity(k) };
    let mut treated = DrawArm { survival: Vec::with_capacity(k), cost: Vec::with_capacity(k) };
    for (arm, survival, cost) in blocks {
        let dst = if arm == 0 { &mut control } else { &mut treated };
        dst.survival.extend_from_slice(&survival);
        dst.cost.extend_from_slice(&cost);
    }
    PotentialDrawSet { control, treated, k, seed }
}

/// Net benefit separation curve from potential-outcome draws: per threshold,
/// the scaled rank statistic of the pooled individual net benefits.
pub fn nbs_from_draws(draws: &PotentialDrawSet, grid: &WtpGrid) -> Vec<CurvePoint> {
    let mut inb0 = vec![0.0; draws.control.survival.len()];
    let mut inb1 = vec![0.0; draws.treated.survival.len()];
    grid.lambdas()
        .iter()
        .map(|&lambda| {
            fill_inb(&mut inb0, &draws.control, lambda);
            fill_inb(&mut inb1, &draws.treated, lambda);
            let est = nbs_two_sample(&inb0, &inb1).expect("draw arms are non-empty");
            #[cfg(debug_assertions)]
            {
                let count_form = crate::rankstats::nbs_pair_count(&inb0, &inb1);
                debug_assert!(
                    (est.value - count_form).abs() < 1e-9,
                    "rank form {} vs pair count {}",
                    est.value,
                    count_form
                );
            }
            CurvePoint::point(lambda, est.value)
        })
        .collect()
}

fn fill_inb(out: &mut [f64], arm: &DrawArm, lambda: f64) {
    for ((b, &s), &y) in out.iter_mut().zip(&arm.survival).zip(&arm.cost) {
        *b = lambda * s - y;
    }
}

/// Net monetary benefit curve from the same draws:
/// `lambda * (mean survival difference) - (mean cost difference)`.
pub fn nmb_from_draws(draws: &PotentialDrawSet, grid: &WtpGrid) -> Vec<CurvePoint> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ds = mean(&draws.treated.survival) - mean(&draws.control.survival);
    let dy = mean(&draws.treated.cost) - mean(&draws.control.cost);
    grid.lambdas().iter().map(|&l| CurvePoint::point(l, l * ds - dy)).collect()
}

/// Convergence and weighting diagnostics of one pipeline run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineDiagnostics {
    pub censoring_model: Option<String>,
    pub censoring: Option<ConvergenceInfo>,
    pub survival: Option<ConvergenceInfo>,
    pub survival_shape: Option<f64>,
    pub cost_sigma: Option<f64>,
    pub cost_zero_part: Option<ConvergenceInfo>,
    /// Point-mass cost draws (fitted residual scale of zero).
    pub sigma_degenerate: bool,
    pub n_cost_censored: usize,
    pub max_censoring_weight: Option<f64>,
}

/// Fitted models of one pipeline run, ready for standardization.
pub struct FittedModels {
    pub survival: WeibullAftFit,
    pub cost: CostModelFit,
    pub weights: CensoringWeights,
    pub censoring: Option<CensoringModel>,
    pub diagnostics: PipelineDiagnostics,
    survival_columns: Vec<usize>,
    cost_columns: Vec<usize>,
    paired_covariate_draws: bool,
    tau: f64,
}

impl FittedModels {
    pub fn standardization_inputs<'a>(
        &'a self,
        covariates: &'a EmpiricalCovariateDistribution,
    ) -> StandardizationInputs<'a> {
        StandardizationInputs {
            survival: &self.survival,
            cost: &self.cost,
            covariates,
            survival_columns: &self.survival_columns,
            cost_columns: &self.cost_columns,
            tau: self.tau,
            paired_covariate_draws: self.paired_covariate_draws,
        }
    }
}

/// Column indices resolved against the dataset's covariate names.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedSpec {
    pub survival_cols: Vec<usize>,
    pub cost_cols: Vec<usize>,
    pub cost_survival_term: bool,
    pub cost_variant: CostVariant,
    pub censoring_model: CensoringModelKind,
    pub censoring_strata_cols: Vec<usize>,
    pub censoring_cols: Vec<usize>,
    pub paired_covariate_draws: bool,
}

pub(crate) enum ResolvedModelSpec {
    Unadjusted,
    Adjusted(ResolvedSpec),
}

pub(crate) fn resolve_spec(
    spec: &ModelSpec,
    covariate_names: &[String],
) -> Result<ResolvedModelSpec, EstimationError> {
    let lookup = |names: &[String]| -> Result<Vec<usize>, EstimationError> {
        names
            .iter()
            .map(|n| {
                covariate_names.iter().position(|c| c == n).ok_or_else(|| {
                    EstimationError::Config(format!("unknown covariate column `{n}`"))
                })
            })
            .collect()
    };
    match spec {
        ModelSpec::Unadjusted => Ok(ResolvedModelSpec::Unadjusted),
        ModelSpec::Adjusted(adj) => {
            if adj.censoring_model == CensoringModelKind::KaplanMeier
                && !adj.censoring_covariates.is_empty()
            {
                return Err(EstimationError::Config(
                    "kaplan_meier censoring model takes strata, not covariates".into(),
                ));
            }
            Ok(ResolvedModelSpec::Adjusted(ResolvedSpec {
                survival_cols: lookup(&adj.survival_covariates)?,
                cost_cols: lookup(&adj.cost_covariates)?,
                cost_survival_term: adj.cost_survival_term,
                cost_variant: adj.cost_variant,
                censoring_model: adj.censoring_model,
                censoring_strata_cols: lookup(&adj.censoring_strata)?,
                censoring_cols: lookup(&adj.censoring_covariates)?,
                paired_covariate_draws: adj.paired_covariate_draws,
            }))
        }
    }
}

/// Dense stratum ids from the exact values of the strata columns, in sorted
/// key order (deterministic across runs).
pub(crate) fn stratum_ids(frame: &Frame, strata_cols: &[usize]) -> (Vec<usize>, usize) {
    if strata_cols.is_empty() {
        return (vec![0; frame.n], 1);
    }
    let key = |i: usize| -> Vec<u64> {
        strata_cols
            .iter()
            .map(|&c| {
                let v = frame.covariate_row(i)[c];
                // fold -0.0 into 0.0 so equal values share a stratum
                (if v == 0.0 { 0.0f64 } else { v }).to_bits()
            })
            .collect()
    };
    let mut keys: Vec<Vec<u64>> = (0..frame.n).map(key).collect();
    let mut sorted: Vec<Vec<u64>> = keys.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let ids = keys
        .drain(..)
        .map(|k| sorted.binary_search(&k).expect("key present"))
        .collect();
    (ids, sorted.len())
}

fn column_matrix(frame: &Frame, cols: &[usize]) -> DesignMatrix {
    let mut data = Vec::with_capacity(frame.n * cols.len());
    for i in 0..frame.n {
        let row = frame.covariate_row(i);
        for &c in cols {
            data.push(row[c]);
        }
    }
    DesignMatrix::from_flat(data, frame.n, cols.len())
}

/// Fits censoring, survival, and cost models on one frame.
pub(crate) fn fit_models_frame(
    frame: &Frame,
    spec: &ResolvedSpec,
) -> Result<FittedModels, EstimationError> {
    let n = frame.n;
    let mut diagnostics = PipelineDiagnostics {
        n_cost_censored: frame.cost_censored.iter().filter(|&&c| c).count(),
        ..PipelineDiagnostics::default()
    };

    // Censoring model and weights. With no censored costs the weights are
    // identically one and no censoring model is fitted.
    let (weights, censoring) = if diagnostics.n_cost_censored == 0 {
        (CensoringWeights::unit(&frame.cost_censored, frame.tau), None)
    } else {
        let (strata, _) = stratum_ids(frame, &spec.censoring_strata_cols);
        let model = match spec.censoring_model {
            CensoringModelKind::KaplanMeier => {
                let fit = fit_kaplan_meier(&frame.time, &frame.cost_censored, Some(&strata))
                    .map_err(fit_err("km"))?;
                diagnostics.censoring_model = Some("kaplan_meier".into());
                CensoringModel {
                    fit: CensoringFit::KaplanMeier(fit),
                    strata,
                    covariates: DesignMatrix::empty(n),
                }
            }
            CensoringModelKind::Cox => {
                let covariates = column_matrix(frame, &spec.censoring_cols);
                let fit =
                    fit_stratified_cox(&frame.time, &frame.cost_censored, Some(&strata), &covariates)
                        .map_err(fit_err("cox"))?;
                diagnostics.censoring_model = Some("cox".into());
                diagnostics.censoring = Some(fit.convergence);
                CensoringModel { fit: CensoringFit::Cox(fit), strata, covariates }
            }
        };
        let weights = compute_censoring_weights_frame(frame, &model)?;
        (weights, Some(model))
    };
    diagnostics.max_censoring_weight =
        weights.weights.iter().flatten().copied().fold(None, |m: Option<f64>, w| {
            Some(m.map_or(w, |v| v.max(w)))
        });

    // Survival model: censored Weibull likelihood on all rows.
    let surv_events: Vec<bool> = frame.survival_censored.iter().map(|&c| !c).collect();
    let treatment: Vec<f64> = frame.treatment.iter().map(|&a| a as f64).collect();
    let survival = fit_weibull_aft(
        &frame.time,
        &surv_events,
        &column_matrix(frame, &spec.survival_cols),
        &treatment,
    )
    .map_err(fit_err("weibull"))?;
    diagnostics.survival = Some(survival.convergence);
    diagnostics.survival_shape = Some(survival.shape);

    // Cost model: weighted fit over the cost-observed rows.
    let case_weights = weights.as_case_weights();
    let horizon: Vec<f64> = (0..n).map(|i| frame.horizon_time(i)).collect();
    let survival_term = spec.cost_survival_term.then_some(horizon.as_slice());
    let cost_covariates = column_matrix(frame, &spec.cost_cols);
    let cost = match spec.cost_variant {
        CostVariant::LogNormal => {
            fit_lognormal_cost(&frame.cost, &cost_covariates, &treatment, survival_term, &case_weights)
                .map_err(fit_err("lognormal"))?
        }
        CostVariant::TwoPart => {
            fit_two_part_cost(&frame.cost, &cost_covariates, &treatment, survival_term, &case_weights)
                .map_err(fit_err("two_part"))?
        }
    };
    diagnostics.cost_sigma = Some(cost.sigma);
    diagnostics.sigma_degenerate = cost.sigma == 0.0;
    diagnostics.cost_zero_part = cost.zero_part.as_ref().map(|z| z.convergence);

    Ok(FittedModels {
        survival,
        cost,
        weights,
        censoring,
        diagnostics,
        survival_columns: spec.survival_cols.clone(),
        cost_columns: spec.cost_cols.clone(),
        paired_covariate_draws: spec.paired_covariate_draws,
        tau: frame.tau,
    })
}

/// Point-estimate curves of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineCurves {
    pub ced: Vec<CurvePoint>,
    pub nmb: Vec<CurvePoint>,
    pub diagnostics: PipelineDiagnostics,
}

/// Runs the full pipeline once and returns the net benefit separation and
/// net monetary benefit curves without intervals.
pub fn run_curves(
    dataset: &ValidatedDataset,
    spec: &ModelSpec,
    grid: &WtpGrid,
    k_draws: usize,
    seed: u64,
) -> Result<PipelineCurves, EstimationError> {
    let resolved = resolve_spec(spec, &dataset.covariate_names)?;
    run_curves_frame(&Frame::from_dataset(dataset), &resolved, grid, k_draws, seed)
}

/// The cost-effectiveness determination curve: the net benefit separation
/// per willingness-to-pay value, end to end from one dataset.
pub fn ced_curve(
    dataset: &ValidatedDataset,
    spec: &ModelSpec,
    grid: &WtpGrid,
    k_draws: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>, EstimationError> {
    Ok(run_curves(dataset, spec, grid, k_draws, seed)?.ced)
}

pub(crate) fn run_curves_frame(
    frame: &Frame,
    spec: &ResolvedModelSpec,
    grid: &WtpGrid,
    k_draws: usize,
    seed: u64,
) -> Result<PipelineCurves, EstimationError> {
    let (n0, n1) = frame.arm_sizes();
    if n0 == 0 || n1 == 0 {
        return Err(RankError::EmptyArm.into());
    }
    match spec {
        ResolvedModelSpec::Unadjusted => unadjusted_curves(frame, grid),
        ResolvedModelSpec::Adjusted(resolved) => {
            let models = fit_models_frame(frame, resolved)?;
            let covariates = EmpiricalCovariateDistribution::from_frame(frame);
            let draws = standardized_draws(&models.standardization_inputs(&covariates), k_draws, seed);
            Ok(PipelineCurves {
                ced: nbs_from_draws(&draws, grid),
                nmb: nmb_from_draws(&draws, grid),
                diagnostics: models.diagnostics,
            })
        }
    }
}

/// Empirical estimator for randomized, censoring-free data: the rank
/// statistic over observed individual net benefits and the plain difference
/// of arm means.
fn unadjusted_curves(frame: &Frame, grid: &WtpGrid) -> Result<PipelineCurves, EstimationError> {
    let censored = frame
        .survival_censored
        .iter()
        .zip(&frame.cost_censored)
        .filter(|(&s, &c)| s || c)
        .count();
    if censored > 0 {
        return Err(EstimationError::UnadjustedIncomplete { censored });
    }
    let mut s = [Vec::new(), Vec::new()];
    let mut y = [Vec::new(), Vec::new()];
    for i in 0..frame.n {
        let arm = frame.treatment[i] as usize;
        s[arm].push(frame.time[i]);
        y[arm].push(frame.cost[i]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ds = mean(&s[1]) - mean(&s[0]);
    let dy = mean(&y[1]) - mean(&y[0]);
    let mut inb0 = vec![0.0; s[0].len()];
    let mut inb1 = vec![0.0; s[1].len()];
    let mut ced = Vec::with_capacity(grid.len());
    let mut nmb = Vec::with_capacity(grid.len());
    for &lambda in grid.lambdas() {
        for (b, (&sv, &yv)) in inb0.iter_mut().zip(s[0].iter().zip(&y[0])) {
            *b = lambda * sv - yv;
        }
        for (b, (&sv, &yv)) in inb1.iter_mut().zip(s[1].iter().zip(&y[1])) {
            *b = lambda * sv - yv;
        }
        ced.push(CurvePoint::point(lambda, nbs_two_sample(&inb0, &inb1)?.value));
        nmb.push(CurvePoint::point(lambda, lambda * ds - dy));
    }
    Ok(PipelineCurves { ced, nmb, diagnostics: PipelineDiagnostics::default() })
}
