//! Core data model: observations, datasets, willingness-to-pay grids, and
//! curve points, plus dataset validation.
//!
//! All types are immutable after validation and safe to share across
//! parallel workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One study subject.
///
/// `observed_time` is the minimum of the survival and censoring times.
/// `survival_censored` is true when censoring preceded the outcome;
/// `cost_censored` is true when censoring preceded both the outcome and the
/// cost horizon, i.e. when the accumulated cost is not fully observed.
/// A censored cost is represented by `cost: None`, never by a sentinel value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    /// Treatment arm: 0 = control, 1 = treated.
    pub treatment: u8,
    pub observed_time: f64,
    pub survival_censored: bool,
    pub cost_censored: bool,
    /// Accumulated cost over `[0, min(survival, horizon)]`; present iff
    /// `cost_censored` is false.
    pub cost: Option<f64>,
    /// Covariate values, aligned with the dataset's `covariate_names`.
    pub covariates: Vec<f64>,
}

/// A two-arm cost/survival dataset with a cost accrual horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEffectivenessDataset {
    pub observations: Vec<Observation>,
    pub covariate_names: Vec<String>,
    /// Cost accrual horizon; `f64::INFINITY` means costs run to the event.
    pub tau: f64,
}

/// A dataset that passed [`validate_dataset`]. The inner dataset is
/// reachable read-only; estimation entry points require this wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDataset(CostEffectivenessDataset);

impl ValidatedDataset {
    pub fn into_inner(self) -> CostEffectivenessDataset {
        self.0
    }

    pub fn n_control(&self) -> usize {
        self.observations.iter().filter(|o| o.treatment == 0).count()
    }

    pub fn n_treated(&self) -> usize {
        self.observations.iter().filter(|o| o.treatment == 1).count()
    }
}

impl std::ops::Deref for ValidatedDataset {
    type Target = CostEffectivenessDataset;

    fn deref(&self) -> &CostEffectivenessDataset {
        &self.0
    }
}

/// Rule violated by a row or by the dataset as a whole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NegativeCost,
    MissingTreatment,
    EmptyArm,
    InconsistentCovariates,
    CostPresentOnCensored,
    MissingCost,
    NegativeTime,
    CensoringInconsistent,
    NonFiniteValue,
    InvalidHorizon,
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Rule::NegativeCost => "NEGATIVE_COST",
            Rule::MissingTreatment => "MISSING_TREATMENT",
            Rule::EmptyArm => "EMPTY_ARM",
            Rule::InconsistentCovariates => "INCONSISTENT_COVARIATES",
            Rule::CostPresentOnCensored => "COST_PRESENT_ON_CENSORED",
            Rule::MissingCost => "MISSING_COST",
            Rule::NegativeTime => "NEGATIVE_TIME",
            Rule::CensoringInconsistent => "CENSORING_INCONSISTENT",
            Rule::NonFiniteValue => "NON_FINITE_VALUE",
            Rule::InvalidHorizon => "INVALID_HORIZON",
        };
        f.write_str(name)
    }
}

/// A single violation: which row (if any) broke which rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Row id, or `None` for dataset-level violations.
    pub row: Option<String>,
    pub rule: Rule,
    pub detail: String,
}

/// Itemized validation failure; lists every violation, not just the first.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "dataset failed validation ({} violations):", self.violations.len())?;
        for v in &self.violations {
            match &v.row {
                Some(id) => writeln!(f, "  row {id}: {}: {}", v.rule, v.detail)?,
                None => writeln!(f, "  dataset: {}: {}", v.rule, v.detail)?,
            }
        }
        Ok(())
    }
}

/// Checks every dataset invariant and returns the dataset untouched when all
/// hold; otherwise returns the full list of violations.
///
/// Validation is idempotent: a validated dataset re-validates unchanged.
pub fn validate_dataset(
    raw: CostEffectivenessDataset,
) -> Result<ValidatedDataset, ValidationReport> {
    let mut violations = Vec::new();
    let n_cov = raw.covariate_names.len();
    let tau = raw.tau;

    if tau.is_nan() || tau <= 0.0 {
        violations.push(Violation {
            row: None,
            rule: Rule::InvalidHorizon,
            detail: format!("cost horizon must be positive, got {tau}"),
        });
    }

    let mut n_arm = [0usize; 2];
    for obs in &raw.observations {
        let row = || Some(obs.id.clone());
        if obs.treatment > 1 {
            violations.push(Violation {
                row: row(),
                rule: Rule::MissingTreatment,
                detail: format!("treatment must be 0 or 1, got {}", obs.treatment),
            });
        } else {
            n_arm[obs.treatment as usize] += 1;
        }
        if obs.observed_time.is_nan() {
            violations.push(Violation {
                row: row(),
                rule: Rule::NonFiniteValue,
                detail: "observed_time is NaN".into(),
            });
        } else if obs.observed_time < 0.0 {
            violations.push(Violation {
                row: row(),
                rule: Rule::NegativeTime,
                detail: format!("observed_time = {}", obs.observed_time),
            });
        }
        match obs.cost {
            Some(c) if obs.cost_censored => violations.push(Violation {
                row: row(),
                rule: Rule::CostPresentOnCensored,
                detail: format!("cost {c} recorded although cost is censored"),
            }),
            Some(c) if !c.is_finite() => violations.push(Violation {
                row: row(),
                rule: Rule::NonFiniteValue,
                detail: format!("cost = {c}"),
            }),
            Some(c) if c < 0.0 => violations.push(Violation {
                row: row(),
                rule: Rule::NegativeCost,
                detail: format!("cost = {c}"),
            }),
            None if !obs.cost_censored => violations.push(Violation {
                row: row(),
                rule: Rule::MissingCost,
                detail: "cost absent although cost is not censored".into(),
            }),
            _ => {}
        }
        // Cross-check the stored censoring indicators against time and tau:
        // a censored cost requires censoring before both the event and the
        // horizon; an event (or horizon) reached first implies observed cost.
        if obs.cost_censored && (!obs.survival_censored || obs.observed_time >= tau) {
            violations.push(Violation {
                row: row(),
                rule: Rule::CensoringInconsistent,
                detail: "cost flagged censored although the outcome or horizon came first".into(),
            });
        }
        if !obs.cost_censored && obs.survival_censored && obs.observed_time < tau {
            violations.push(Violation {
                row: row(),
                rule: Rule::CensoringInconsistent,
                detail: "survival censored before the horizon but cost flagged observed".into(),
            });
        }
        if obs.covariates.len() != n_cov {
            violations.push(Violation {
                row: row(),
                rule: Rule::InconsistentCovariates,
                detail: format!("expected {n_cov} covariates, got {}", obs.covariates.len()),
            });
        } else if let Some((j, bad)) =
            obs.covariates.iter().enumerate().find(|(_, v)| !v.is_finite())
        {
            violations.push(Violation {
                row: row(),
                rule: Rule::NonFiniteValue,
                detail: format!("covariate {} = {bad}", raw.covariate_names[j]),
            });
        }
    }
    for (arm, count) in n_arm.iter().enumerate() {
        if *count == 0 {
            violations.push(Violation {
                row: None,
                rule: Rule::EmptyArm,
                detail: format!("treatment arm {arm} has no observations"),
            });
        }
    }

    if violations.is_empty() {
        Ok(ValidatedDataset(raw))
    } else {
        Err(ValidationReport { violations })
    }
}

/// Strictly increasing grid of nonnegative willingness-to-pay thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtpGrid {
    lambdas: Vec<f64>,
}

/// Grid construction failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("willingness-to-pay grid must be non-empty")]
    Empty,
    #[error("willingness-to-pay values must be finite and nonnegative, got {0}")]
    Negative(f64),
    #[error("willingness-to-pay grid must be strictly increasing at index {0}")]
    NotIncreasing(usize),
}

impl WtpGrid {
    pub fn new(lambdas: Vec<f64>) -> Result<Self, GridError> {
        if lambdas.is_empty() {
            return Err(GridError::Empty);
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                return Err(GridError::Negative(l));
            }
            if i > 0 && l <= lambdas[i - 1] {
                return Err(GridError::NotIncreasing(i));
            }
        }
        Ok(WtpGrid { lambdas })
    }

    /// Uniform grid `min, min+step, ...` up to and including `max` (within
    /// half a step of floating-point slack).
    pub fn from_range(min: f64, max: f64, step: f64) -> Result<Self, GridError> {
        if step.is_nan() || step <= 0.0 || !min.is_finite() || !max.is_finite() || max < min {
            return Err(GridError::Empty);
        }
        let n = ((max - min) / step + 0.5).floor() as usize + 1;
        Self::new((0..n).map(|i| min + step * i as f64).collect())
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// One point of an estimated curve over the willingness-to-pay grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub estimate: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

impl CurvePoint {
    pub fn point(lambda: f64, estimate: f64) -> Self {
        CurvePoint { lambda, estimate, ci_lower: None, ci_upper: None }
    }
}
