//! Benchmark data-generating processes, the oracle for the true separation,
//! and the replication harness that aggregates estimator performance over
//! many simulated datasets.
//!
//! The generating process draws two covariates (standard normal `l1`,
//! Bernoulli(0.5) `l2`), confounded treatment `A ~ Bernoulli(expit(l1))`,
//! Weibull survival and censoring times, and log-normal costs whose mean
//! rises with survival. Costs accrue to the event (no finite horizon), so a
//! censored survival time censors the cost as well.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_dataset, CostEffectivenessDataset, Observation, ValidatedDataset, WtpGrid,
};
use crate::inference::{bootstrap_curves, BootstrapOptions};
use crate::models::CostVariant;
use crate::rankstats::nbs_two_sample;
use crate::rng::{child_seed, stream_rng};
use crate::standardize::{
    AdjustedSpec, CensoringModelKind, DrawArm, EstimationError, ModelSpec, PotentialDrawSet,
};

/// Cost-model intercept of the generating process.
pub const COST_INTERCEPT: f64 = 4.2;
/// Cost sensitivity to survival time in the generating process.
pub const COST_SURVIVAL_SLOPE: f64 = 0.002;

/// Target censoring fraction of the benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringLevel {
    /// 10% censoring.
    Low,
    /// 25% censoring.
    High,
}

impl CensoringLevel {
    pub fn log_scale_intercept(self) -> f64 {
        match self {
            CensoringLevel::Low => 5.65,
            CensoringLevel::High => 5.10,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CensoringLevel::Low => "0.10",
            CensoringLevel::High => "0.25",
        }
    }
}

/// The two benchmark scenarios: no treatment effect, and a treatment that
/// increases both survival and cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Null,
    Effect,
}

/// All parameters of the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Survival log-scale intercept.
    pub alpha0: f64,
    /// Survival log-scale treatment effect.
    pub alpha_a: f64,
    /// Log-cost treatment effect.
    pub gamma_a: f64,
    /// Censoring log-scale intercept.
    pub beta0: f64,
    pub sigma_cost: f64,
    pub survival_shape: f64,
    pub censoring_shape: f64,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Benchmark configuration for one scenario and censoring level.
    pub fn benchmark(scenario: Scenario, censoring: CensoringLevel, n: usize, seed: u64) -> Self {
        let (alpha0, alpha_a, gamma_a) = match scenario {
            Scenario::Null => (4.5, 0.0, 0.0),
            Scenario::Effect => (4.05, 0.7, 0.1),
        };
        ScenarioConfig {
            alpha0,
            alpha_a,
            gamma_a,
            beta0: censoring.log_scale_intercept(),
            sigma_cost: 0.4,
            survival_shape: 2.0,
            censoring_shape: 2.0,
            n,
            seed,
        }
    }

    fn survival_scale(&self, l1: f64, l2: f64, arm: f64) -> f64 {
        (self.alpha0 + 0.2 * l1 + 0.2 * l2 + self.alpha_a * arm).exp()
    }

    fn censoring_scale(&self, l2: f64) -> f64 {
        (self.beta0 + 0.1 * l2).exp()
    }

    fn mean_log_cost(&self, survival: f64, arm: f64) -> f64 {
        COST_INTERCEPT + COST_SURVIVAL_SLOPE * survival + self.gamma_a * arm
    }
}

fn weibull_draw<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    scale * (-u.ln()).powf(1.0 / shape)
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Draws one dataset from the generating process. Covariates are named
/// `l1` and `l2`; costs accrue to the event (`tau` is infinite), so the
/// cost-censoring indicator equals the survival-censoring indicator.
pub fn generate_scenario_dataset<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> ValidatedDataset {
    let mut observations = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let l1: f64 = StandardNormal.sample(rng);
        let l2 = f64::from(rng.random::<f64>() < 0.5);
        let arm = u8::from(rng.random::<f64>() < expit(l1));
        let survival = weibull_draw(config.survival_shape, config.survival_scale(l1, l2, arm as f64), rng);
        let censoring = weibull_draw(config.censoring_shape, config.censoring_scale(l2), rng);
        let noise: f64 = StandardNormal.sample(rng);
        let cost = (config.mean_log_cost(survival, arm as f64) + config.sigma_cost * noise).exp();
        let censored = censoring < survival;
        observations.push(Observation {
            id: (i + 1).to_string(),
            treatment: arm,
            observed_time: survival.min(censoring),
            survival_censored: censored,
            cost_censored: censored,
            cost: (!censored).then_some(cost),
            covariates: vec![l1, l2],
        });
    }
    validate_dataset(CostEffectivenessDataset {
        observations,
        covariate_names: vec!["l1".into(), "l2".into()],
        tau: f64::INFINITY,
    })
    .expect("generated dataset satisfies the invariants")
}

/// Convenience wrapper using the config's own seed.
pub fn generate_dataset(config: &ScenarioConfig) -> ValidatedDataset {
    let mut rng = stream_rng(config.seed, 0);
    generate_scenario_dataset(config, &mut rng)
}

const ORACLE_BLOCK: usize = 1 << 16;

/// Potential-outcome draws straight from the generating process (fresh
/// covariates per draw, no censoring, no treatment assignment); the ground
/// truth that the standardization pipeline estimates.
pub fn oracle_potential_draws(config: &ScenarioConfig, m: usize, seed: u64) -> PotentialDrawSet {
    assert!(m >= 1);
    let n_blocks = m.div_ceil(ORACLE_BLOCK);
    let jobs: Vec<(u8, usize)> =
        (0..2u8).flat_map(|arm| (0..n_blocks).map(move |b| (arm, b))).collect();
    let blocks: Vec<(u8, Vec<f64>, Vec<f64>)> = jobs
        .into_par_iter()
        .map(|(arm, block)| {
            let lo = block * ORACLE_BLOCK;
            let hi = (lo + ORACLE_BLOCK).min(m);
            let mut rng = stream_rng(seed, ((arm as u64) << 48) | block as u64);
            let mut survival = Vec::with_capacity(hi - lo);
            let mut cost = Vec::with_capacity(hi - lo);
            for _ in lo..hi {
                let l1: f64 = StandardNormal.sample(&mut rng);
                let l2 = f64::from(rng.random::<f64>() < 0.5);
                let s = weibull_draw(
                    config.survival_shape,
                    config.survival_scale(l1, l2, arm as f64),
                    &mut rng,
                );
                let noise: f64 = StandardNormal.sample(&mut rng);
                let y = (config.mean_log_cost(s, arm as f64) + config.sigma_cost * noise).exp();
                survival.push(s);
                cost.push(y);
            }
            (arm, survival, cost)
        })
        .collect();
    let mut control = DrawArm { survival: Vec::with_capacity(m), cost: Vec::with_capacity(m) };
    let mut treated = DrawArm { survival: Vec::with_capacity(m), cost: Vec::with_capacity(m) };
    for (arm, survival, cost) in blocks {
        let dst = if arm == 0 { &mut control } else { &mut treated };
        dst.survival.extend_from_slice(&survival);
        dst.cost.extend_from_slice(&cost);
    }
    PotentialDrawSet { control, treated, k: m, seed }
}

/// Brute-force true separation at one willingness-to-pay value, from
/// `m` potential-outcome pairs per arm drawn directly from the generating
/// process.
pub fn oracle_true_theta(config: &ScenarioConfig, lambda: f64, m: usize, seed: u64) -> f64 {
    let draws = oracle_potential_draws(config, m, seed);
    let inb = |arm: &DrawArm| -> Vec<f64> {
        arm.survival.iter().zip(&arm.cost).map(|(&s, &y)| lambda * s - y).collect()
    };
    nbs_two_sample(&inb(&draws.control), &inb(&draws.treated))
        .expect("oracle arms are non-empty")
        .value
}

/// The model specification the replication harness fits on every simulated
/// dataset: Kaplan-Meier censoring weights stratified by `l2`, a Weibull
/// survival model on `(l1, l2, treatment)`, and a log-normal cost model on
/// `(l1, l2, treatment)`.
///
/// The cost model conditions on covariates and treatment but not on the
/// survival value, so drawn costs are independent of drawn survival times
/// given covariates. The benchmark estimator means carry the small
/// attenuation from that broken link; a survival-conditional cost model
/// (`cost_survival_term = true`) tracks the true separation instead.
pub fn replication_model_spec() -> ModelSpec {
    ModelSpec::Adjusted(AdjustedSpec {
        survival_covariates: vec!["l1".into(), "l2".into()],
        cost_covariates: vec!["l1".into(), "l2".into()],
        cost_survival_term: false,
        cost_variant: CostVariant::LogNormal,
        censoring_model: CensoringModelKind::KaplanMeier,
        censoring_strata: vec!["l2".into()],
        censoring_covariates: vec![],
        paired_covariate_draws: false,
    })
}

/// One cell of the replication grid.
#[derive(Debug, Clone)]
pub struct ReplicationCell {
    pub config: ScenarioConfig,
    /// Censoring column of the report (the nominal fraction, e.g. "0.10").
    pub censoring_label: String,
}

impl ReplicationCell {
    pub fn benchmark(scenario: Scenario, censoring: CensoringLevel, n: usize) -> Self {
        ReplicationCell {
            config: ScenarioConfig::benchmark(scenario, censoring, n, 0),
            censoring_label: censoring.label().to_string(),
        }
    }
}

/// Harness configuration.
#[derive(Debug, Clone)]
pub struct ReplicationOptions {
    pub n_replicates: usize,
    pub k_boot: usize,
    pub k_draws: usize,
    pub lambdas: Vec<f64>,
    /// Draws per arm for the oracle truth column.
    pub m_oracle: usize,
    pub seed: u64,
    /// Model fitted per replicate; `None` uses [`replication_model_spec`].
    pub spec: Option<ModelSpec>,
}

impl ReplicationOptions {
    pub fn new(n_replicates: usize, k_boot: usize, k_draws: usize, lambdas: Vec<f64>, seed: u64) -> Self {
        ReplicationOptions {
            n_replicates,
            k_boot,
            k_draws,
            lambdas,
            m_oracle: 1_000_000,
            seed,
            spec: None,
        }
    }
}

/// One aggregated row of the replication report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub censoring: String,
    pub n: usize,
    pub lambda: f64,
    pub theta_true: f64,
    /// Mean point estimate across replicates.
    pub mean_est: f64,
    /// Empirical standard error: standard deviation of the point estimates.
    pub ese: f64,
    /// Mean bootstrap standard error.
    pub mean_se: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub rows: Vec<ReportRow>,
}

impl ReplicationReport {
    /// Writes the report as CSV with the columns
    /// `censoring,n,lambda,theta_true,mean_est,ese,mean_se,n_ok,n_failed`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "censoring,n,lambda,theta_true,mean_est,ese,mean_se,n_ok,n_failed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.censoring, r.n, r.lambda, r.theta_true, r.mean_est, r.ese, r.mean_se, r.n_ok, r.n_failed
            )?;
        }
        Ok(())
    }
}

/// Runs the full estimator pipeline (point estimate plus bootstrap standard
/// error) on `n_replicates` fresh datasets per cell and aggregates the
/// results. Replicates whose pipeline fails are dropped and counted; more
/// than 5% failures in a cell is an error.
pub fn run_replication_study(
    cells: &[ReplicationCell],
    options: &ReplicationOptions,
) -> Result<ReplicationReport, EstimationError> {
    if cells.is_empty() || options.lambdas.is_empty() || options.n_replicates == 0 {
        return Err(EstimationError::Config("empty replication grid".into()));
    }
    let grid = WtpGrid::new(options.lambdas.clone())
        .map_err(|e| EstimationError::Config(e.to_string()))?;
    let spec = options.spec.clone().unwrap_or_else(replication_model_spec);
    let mut rows = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        let cell_seed = child_seed(options.seed, cell_idx as u64);
        type ReplicateStats = Result<(Vec<f64>, Vec<f64>), EstimationError>;
        let outcomes: Vec<ReplicateStats> = (0..options.n_replicates)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = child_seed(cell_seed, 1000 + rep as u64);
                let mut rng = stream_rng(child_seed(rep_seed, 0), 0);
                let dataset = generate_scenario_dataset(&cell.config, &mut rng);
                let boot = bootstrap_curves(
                    &dataset,
                    &spec,
                    &grid,
                    &BootstrapOptions::new(
                        options.k_boot,
                        options.k_draws,
                        0.05,
                        child_seed(rep_seed, 1),
                    ),
                )?;
                Ok((boot.nbs.point.clone(), boot.nbs.standard_errors()))
            })
            .collect();

        let mut points: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        let mut ses: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        let mut n_failed = 0usize;
        let mut first_failure = None;
        for outcome in outcomes {
            match outcome {
                Ok((point, se)) => {
                    for (i, v) in point.into_iter().enumerate() {
                        points[i].push(v);
                    }
                    for (i, v) in se.into_iter().enumerate() {
                        ses[i].push(v);
                    }
                }
                Err(e) => {
                    n_failed += 1;
                    first_failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if n_failed * 20 > options.n_replicates {
            return Err(EstimationError::TooManyReplicateFailures {
                failed: n_failed,
                attempted: options.n_replicates,
                first: first_failure.unwrap_or_default(),
            });
        }
        let oracle_seed = child_seed(cell_seed, 999);
        for (i, &lambda) in grid.lambdas().iter().enumerate() {
            let theta_true = oracle_true_theta(&cell.config, lambda, options.m_oracle, oracle_seed);
            let n_ok = points[i].len();
            let mean_est = points[i].iter().sum::<f64>() / n_ok as f64;
            let ese = (points[i].iter().map(|v| (v - mean_est).powi(2)).sum::<f64>()
                / (n_ok as f64 - 1.0))
                .sqrt();
            let mean_se = ses[i].iter().sum::<f64>() / n_ok as f64;
            rows.push(ReportRow {
                censoring: cell.censoring_label.clone(),
                n: cell.config.n,
                lambda,
                theta_true,
                mean_est,
                ese,
                mean_se,
                n_ok,
                n_failed,
            });
        }
    }
    Ok(ReplicationReport { rows })
}
