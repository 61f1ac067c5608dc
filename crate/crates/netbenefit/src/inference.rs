//! Bootstrap intervals for the separation and net monetary benefit curves,
//! the acceptability curve, and the asymptotic null test.
//!
//! Replicates resample observations with replacement and re-run the whole
//! pipeline (censoring model, weights, survival and cost fits,
//! standardization). Each replicate owns a seed derived from the analysis
//! seed and the replicate index, so results do not depend on the worker
//! count. Interval endpoints are empirical percentiles of the replicate
//! estimates with linear interpolation between order statistics.

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{CurvePoint, ValidatedDataset, WtpGrid};
use crate::frame::Frame;
use crate::rng::{child_seed, stream_rng};
use crate::standardize::{
    resolve_spec, run_curves_frame, EstimationError, ModelSpec, PipelineDiagnostics,
};

/// Bootstrap configuration.
#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    /// Number of bootstrap replicates (at least 2).
    pub k_boot: usize,
    /// Monte-Carlo draws per arm inside every pipeline run.
    pub k_draws: usize,
    /// Two-sided interval level, e.g. 0.05 for 95% intervals.
    pub alpha: f64,
    pub seed: u64,
    /// Resample within each treatment arm instead of over all rows.
    pub stratified_by_arm: bool,
}

impl BootstrapOptions {
    pub fn new(k_boot: usize, k_draws: usize, alpha: f64, seed: u64) -> Self {
        BootstrapOptions { k_boot, k_draws, alpha, seed, stratified_by_arm: false }
    }
}

/// Point estimates, replicate estimates, and percentile intervals per
/// willingness-to-pay value for one curve.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub lambdas: Vec<f64>,
    pub point: Vec<f64>,
    /// Replicate estimates per lambda: `replicates[i]` has one entry per
    /// surviving replicate.
    pub replicates: Vec<Vec<f64>>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub alpha: f64,
}

impl BootstrapResult {
    pub fn curve_points(&self) -> Vec<CurvePoint> {
        (0..self.lambdas.len())
            .map(|i| CurvePoint {
                lambda: self.lambdas[i],
                estimate: self.point[i],
                ci_lower: Some(self.ci_lower[i]),
                ci_upper: Some(self.ci_upper[i]),
            })
            .collect()
    }

    /// Bootstrap standard error per lambda: the sample standard deviation of
    /// the replicate estimates.
    pub fn standard_errors(&self) -> Vec<f64> {
        self.replicates
            .iter()
            .map(|reps| {
                let n = reps.len() as f64;
                let mean = reps.iter().sum::<f64>() / n;
                (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            })
            .collect()
    }
}

/// Full bootstrap output for both curves.
#[derive(Debug, Clone)]
pub struct CurveBootstrap {
    pub nbs: BootstrapResult,
    pub nmb: BootstrapResult,
    pub attempted: usize,
    /// Replicate index and stage-labelled error of every dropped replicate.
    pub failures: Vec<(usize, String)>,
    /// Seed of every attempted replicate, in replicate order.
    pub replicate_seeds: Vec<u64>,
    /// Diagnostics of the point-estimate fit.
    pub diagnostics: PipelineDiagnostics,
}

/// Runs the pipeline on the full dataset and on `k_boot` resamples, and
/// forms percentile intervals for the separation and net monetary benefit
/// curves.
///
/// Replicates whose refit fails (a resample can lose all events or an arm)
/// are dropped and recorded; more than 5% failures is an error.
pub fn bootstrap_curves(
    dataset: &ValidatedDataset,
    spec: &ModelSpec,
    grid: &WtpGrid,
    options: &BootstrapOptions,
) -> Result<CurveBootstrap, EstimationError> {
    if options.k_boot < 2 {
        return Err(EstimationError::Config("k_boot must be at least 2".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(EstimationError::Config("alpha must lie in (0, 1)".into()));
    }
    let resolved = resolve_spec(spec, &dataset.covariate_names)?;
    let frame = Frame::from_dataset(dataset);

    let point =
        run_curves_frame(&frame, &resolved, grid, options.k_draws, child_seed(options.seed, 0))?;

    let replicate_seeds: Vec<u64> =
        (0..options.k_boot).map(|r| child_seed(options.seed, 1 + r as u64)).collect();
    type ReplicateCurves = Result<(Vec<f64>, Vec<f64>), EstimationError>;
    let outcomes: Vec<ReplicateCurves> = replicate_seeds
        .par_iter()
        .map(|&rep_seed| {
            let rows = resample_rows(&frame, options.stratified_by_arm, child_seed(rep_seed, 0));
            let resampled = frame.gather(&rows);
            run_curves_frame(&resampled, &resolved, grid, options.k_draws, child_seed(rep_seed, 1))
                .map(|curves| {
                    (
                        curves.ced.iter().map(|p| p.estimate).collect(),
                        curves.nmb.iter().map(|p| p.estimate).collect(),
                    )
                })
        })
        .collect();

    let mut failures = Vec::new();
    let mut nbs_reps: Vec<Vec<f64>> = vec![Vec::with_capacity(options.k_boot); grid.len()];
    let mut nmb_reps: Vec<Vec<f64>> = vec![Vec::with_capacity(options.k_boot); grid.len()];
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((ced, nmb)) => {
                for (i, v) in ced.into_iter().enumerate() {
                    nbs_reps[i].push(v);
                }
                for (i, v) in nmb.into_iter().enumerate() {
                    nmb_reps[i].push(v);
                }
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() * 20 > options.k_boot {
        return Err(EstimationError::TooManyReplicateFailures {
            failed: failures.len(),
            attempted: options.k_boot,
            first: failures[0].1.clone(),
        });
    }

    let build = |lambdas: &[f64], point: Vec<f64>, replicates: Vec<Vec<f64>>| {
        let mut ci_lower = Vec::with_capacity(lambdas.len());
        let mut ci_upper = Vec::with_capacity(lambdas.len());
        for reps in &replicates {
            let mut sorted = reps.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            ci_lower.push(percentile(&sorted, options.alpha / 2.0));
            ci_upper.push(percentile(&sorted, 1.0 - options.alpha / 2.0));
        }
        BootstrapResult {
            lambdas: lambdas.to_vec(),
            point,
            replicates,
            ci_lower,
            ci_upper,
            alpha: options.alpha,
        }
    };
    Ok(CurveBootstrap {
        nbs: build(grid.lambdas(), point.ced.iter().map(|p| p.estimate).collect(), nbs_reps),
        nmb: build(grid.lambdas(), point.nmb.iter().map(|p| p.estimate).collect(), nmb_reps),
        attempted: options.k_boot,
        failures,
        replicate_seeds,
        diagnostics: point.diagnostics,
    })
}

fn resample_rows(frame: &Frame, stratified_by_arm: bool, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, 0);
    let n = frame.n;
    if !stratified_by_arm {
        return (0..n).map(|_| rng.random_range(0..n)).collect();
    }
    let mut arm_rows = [Vec::new(), Vec::new()];
    for i in 0..n {
        arm_rows[frame.treatment[i] as usize].push(i);
    }
    let mut rows = Vec::with_capacity(n);
    for members in &arm_rows {
        for _ in 0..members.len() {
            rows.push(members[rng.random_range(0..members.len())]);
        }
    }
    rows
}

/// Empirical quantile with linear interpolation between order statistics
/// (the `sorted` input must be ascending).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Cost-effectiveness acceptability curve: per willingness-to-pay value, the
/// share of bootstrap net monetary benefit estimates strictly above zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CeaCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

impl CeaCurve {
    pub fn curve_points(&self) -> Vec<CurvePoint> {
        self.lambdas
            .iter()
            .zip(&self.values)
            .map(|(&l, &v)| CurvePoint::point(l, v))
            .collect()
    }
}

/// Builds the acceptability curve from the net monetary benefit bootstrap.
pub fn cea_curve(nmb_bootstrap: &BootstrapResult) -> CeaCurve {
    let values = nmb_bootstrap
        .replicates
        .iter()
        .map(|reps| reps.iter().filter(|&&v| v > 0.0).count() as f64 / reps.len() as f64)
        .collect();
    CeaCurve { lambdas: nmb_bootstrap.lambdas.clone(), values }
}

/// Asymptotic test of no separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullTest {
    pub z: f64,
    pub p_value: f64,
}

/// Under no separation, `sqrt(n_treated) (estimate - 1/2)` is asymptotically
/// normal with variance `(r + 1) / (12 r)` where `r = n_control / n_treated`.
/// Returns the standardized statistic and the two-sided normal p-value.
pub fn asymptotic_null_test(theta_hat: f64, n_control: usize, n_treated: usize) -> NullTest {
    assert!(n_control >= 1 && n_treated >= 1);
    let r = n_control as f64 / n_treated as f64;
    let variance = (r + 1.0) / (12.0 * r);
    let z = (n_treated as f64).sqrt() * (theta_hat - 0.5) / variance.sqrt();
    let p_value = libm::erfc(z.abs() / std::f64::consts::SQRT_2);
    NullTest { z, p_value }
}
