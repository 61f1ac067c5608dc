//! Fitted model families used by standardization and censoring weighting:
//! Kaplan-Meier, stratified Cox partial likelihood, Weibull accelerated
//! failure time regression, weighted logistic regression, and log-normal /
//! two-part cost models, together with sampling from the fitted survival
//! and cost distributions.

mod cost;
mod cox;
mod kaplan_meier;
mod linalg;
mod logistic;
mod weibull;

pub use cost::{fit_lognormal_cost, fit_two_part_cost, sample_cost_draw, CostModelFit, CostVariant};
pub use cox::{fit_stratified_cox, CoxFit};
pub use kaplan_meier::{fit_kaplan_meier, KaplanMeierFit};
pub use logistic::{fit_logistic, LogisticFit};
pub use weibull::{fit_weibull_aft, sample_survival_draw, WeibullAftFit};

use serde::Serialize;
use thiserror::Error;

/// Fitting failure shared across the model families.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("NO_EVENTS: at least one observed event is required")]
    NoEvents,
    #[error("NONCONVERGENCE: gradient norm {gradient_norm:.3e} after {iterations} iterations")]
    Nonconvergence { iterations: usize, gradient_norm: f64 },
    #[error("SINGULAR_INFORMATION: information matrix is singular")]
    SingularInformation,
    #[error("SINGULAR_DESIGN: design matrix is rank deficient")]
    SingularDesign,
    #[error("SEPARATION: a coefficient diverged past the +/-30 guard")]
    Separation,
    #[error("EMPTY_STRATUM: stratum {0} has no observations")]
    EmptyStratum(usize),
    #[error("ZERO_COSTS_PRESENT: log-normal cost model requires strictly positive costs")]
    ZeroCostsPresent,
    #[error("NO_POSITIVE_COSTS: two-part cost model requires at least one positive cost")]
    NoPositiveCosts,
    #[error("INVALID_INPUT: {0}")]
    InvalidInput(String),
}

/// Newton iteration summary carried by every regression fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceInfo {
    pub iterations: usize,
    /// Infinity norm of the score at the optimum.
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

/// Gradient tolerance (infinity norm) for all Newton-type fits.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Iteration cap for all Newton-type fits.
pub const MAX_ITERATIONS: usize = 50;
/// Logistic coefficients beyond this magnitude indicate separation.
pub const SEPARATION_GUARD: f64 = 30.0;

/// Dense row-major matrix of covariate values (no intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DesignMatrix {
    /// An `n x 0` matrix for intercept-only models.
    pub fn empty(rows: usize) -> Self {
        DesignMatrix { data: Vec::new(), rows, cols: 0 }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged design matrix");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        DesignMatrix { data, rows: rows.len(), cols }
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "flat data does not match dimensions");
        DesignMatrix { data, rows, cols }
    }

    /// Single-column matrix.
    pub fn from_column(col: &[f64]) -> Self {
        DesignMatrix { data: col.to_vec(), rows: col.len(), cols: 1 }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}
