//! Cost models: weighted log-normal regression and the two-part
//! (zero-inflated) variant, plus sampling from the fitted distribution.
//!
//! The mean of log cost is linear in `[intercept | covariates | treatment |
//! survival term]`, where the survival term is optional. The two-part
//! variant adds a logistic model for `P(cost = 0)` on the same design.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::logistic::fit_logistic;
use super::{ConvergenceInfo, DesignMatrix, LogisticFit, ModelError, SEPARATION_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    LogNormal,
    TwoPart,
}

/// Fitted cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModelFit {
    pub variant: CostVariant,
    /// Mean coefficients of log cost: intercept, covariates, treatment,
    /// then the survival term when present.
    pub mean_coef: Vec<f64>,
    /// Residual standard deviation of log cost (maximum likelihood scaling).
    pub sigma: f64,
    /// Probability-of-zero-cost model; present only for the two-part variant.
    pub zero_part: Option<LogisticFit>,
    pub convergence: ConvergenceInfo,
    pub(crate) n_covariates: usize,
    pub(crate) has_survival_term: bool,
}

impl CostModelFit {
    pub fn from_parameters(
        variant: CostVariant,
        mean_coef: Vec<f64>,
        sigma: f64,
        zero_part: Option<LogisticFit>,
        n_covariates: usize,
        has_survival_term: bool,
    ) -> Self {
        assert!(sigma >= 0.0);
        let expected = n_covariates + 2 + usize::from(has_survival_term);
        assert_eq!(mean_coef.len(), expected, "coefficient layout mismatch");
        assert_eq!(variant == CostVariant::TwoPart, zero_part.is_some());
        CostModelFit {
            variant,
            mean_coef,
            sigma,
            zero_part,
            convergence: ConvergenceInfo { iterations: 0, gradient_norm: 0.0, log_likelihood: f64::NAN },
            n_covariates,
            has_survival_term,
        }
    }

    /// Mean of log cost for one covariate row, arm, and survival value.
    pub fn mean_log_cost(&self, covariates: &[f64], arm: u8, survival: f64) -> f64 {
        debug_assert_eq!(covariates.len(), self.n_covariates);
        let mut mu = self.mean_coef[0];
        for (j, &x) in covariates.iter().enumerate() {
            mu += self.mean_coef[1 + j] * x;
        }
        mu += self.mean_coef[1 + self.n_covariates] * arm as f64;
        if self.has_survival_term {
            mu += self.mean_coef[2 + self.n_covariates] * survival;
        }
        mu
    }

    fn zero_probability(&self, covariates: &[f64], arm: u8, survival: f64) -> f64 {
        let Some(zero) = &self.zero_part else { return 0.0 };
        let mut design = Vec::with_capacity(self.n_covariates + 2);
        design.extend_from_slice(covariates);
        design.push(arm as f64);
        if self.has_survival_term {
            design.push(survival);
        }
        zero.probability(&design)
    }
}

/// One random cost draw from the fitted model, conditional on the survival
/// draw. Two-part fits first decide zero vs positive, then draw the positive
/// part from the fitted log-normal; a zero residual SD gives the point mass
/// `exp(mean)`.
pub fn sample_cost_draw<R: Rng + ?Sized>(
    fit: &CostModelFit,
    covariates: &[f64],
    arm: u8,
    survival: f64,
    rng: &mut R,
) -> f64 {
    if fit.variant == CostVariant::TwoPart {
        let p_zero = fit.zero_probability(covariates, arm, survival);
        if rng.random::<f64>() < p_zero {
            return 0.0;
        }
    }
    let mu = fit.mean_log_cost(covariates, arm, survival);
    let z: f64 = StandardNormal.sample(rng);
    (mu + fit.sigma * z).exp()
}

/// True when the treatment column varies over the rows with positive
/// weight. Single-arm data drop the treatment column and pin its
/// coefficient at zero instead of producing a singular design.
fn treatment_varies(treatment: &[f64], weights: &[f64]) -> bool {
    let mut first = None;
    for (&t, &w) in treatment.iter().zip(weights) {
        if w > 0.0 {
            match first {
                None => first = Some(t),
                Some(f) if f != t => return true,
                _ => {}
            }
        }
    }
    false
}

fn build_design(
    covariates: &DesignMatrix,
    treatment: &[f64],
    survival_term: Option<&[f64]>,
    include_treatment: bool,
    keep: impl Fn(usize) -> bool,
) -> (Vec<f64>, usize, Vec<usize>) {
    let p = covariates.n_cols() + 1 + usize::from(include_treatment)
        + usize::from(survival_term.is_some());
    let mut data = Vec::new();
    let mut rows = Vec::new();
    for i in 0..covariates.n_rows() {
        if !keep(i) {
            continue;
        }
        data.push(1.0);
        data.extend_from_slice(covariates.row(i));
        if include_treatment {
            data.push(treatment[i]);
        }
        if let Some(s) = survival_term {
            data.push(s[i]);
        }
        rows.push(i);
    }
    (data, p, rows)
}

/// Weighted least squares of log cost on `[intercept | covariates |
/// treatment | survival term]`. All fitted costs must be strictly positive;
/// route zero-inflated data to [`fit_two_part_cost`]. The residual scale is
/// the weighted root mean square (maximum likelihood denominator).
pub fn fit_lognormal_cost(
    costs: &[f64],
    covariates: &DesignMatrix,
    treatment: &[f64],
    survival_term: Option<&[f64]>,
    weights: &[f64],
) -> Result<CostModelFit, ModelError> {
    let n = costs.len();
    if n == 0
        || covariates.n_rows() != n
        || treatment.len() != n
        || weights.len() != n
        || survival_term.is_some_and(|s| s.len() != n)
    {
        return Err(ModelError::InvalidInput("input lengths disagree".into()));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(ModelError::InvalidInput("weights must be finite and nonnegative".into()));
    }
    if costs.iter().zip(weights).any(|(&c, &w)| w > 0.0 && c <= 0.0) {
        return Err(ModelError::ZeroCostsPresent);
    }
    let treat_on = treatment_varies(treatment, weights);
    let (design, p, rows) =
        build_design(covariates, treatment, survival_term, treat_on, |i| weights[i] > 0.0);
    if rows.is_empty() {
        return Err(ModelError::InvalidInput("no rows with positive weight".into()));
    }

    let mut xtwx = vec![0.0; p * p];
    let mut xtwy = vec![0.0; p];
    for (r, &i) in rows.iter().enumerate() {
        let x = &design[r * p..(r + 1) * p];
        let w = weights[i];
        let y = costs[i].ln();
        for j in 0..p {
            xtwy[j] += w * x[j] * y;
            for m in j..p {
                xtwx[j * p + m] += w * x[j] * x[m];
            }
        }
    }
    for j in 0..p {
        for m in (j + 1)..p {
            xtwx[m * p + j] = xtwx[j * p + m];
        }
    }
    let mut coef = xtwy.clone();
    let mut a = xtwx.clone();
    if !super::linalg::solve_spd_in_place(&mut a, &mut coef, p) {
        return Err(ModelError::SingularDesign);
    }

    let mut wss = 0.0;
    let mut wsum = 0.0;
    let mut log_lik = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        let x = &design[r * p..(r + 1) * p];
        let w = weights[i];
        let fitted: f64 = x.iter().zip(&coef).map(|(xv, b)| xv * b).sum();
        let resid = costs[i].ln() - fitted;
        wss += w * resid * resid;
        wsum += w;
    }
    let sigma = (wss / wsum).sqrt();
    if sigma > 0.0 {
        // Weighted Gaussian log likelihood of the log costs at the optimum.
        log_lik = -0.5 * wsum * ((2.0 * std::f64::consts::PI * sigma * sigma).ln() + 1.0);
    }
    if !treat_on {
        coef.insert(1 + covariates.n_cols(), 0.0);
    }

    Ok(CostModelFit {
        variant: CostVariant::LogNormal,
        mean_coef: coef,
        sigma,
        zero_part: None,
        convergence: ConvergenceInfo { iterations: 1, gradient_norm: 0.0, log_likelihood: log_lik },
        n_covariates: covariates.n_cols(),
        has_survival_term: survival_term.is_some(),
    })
}

/// Two-part cost model: a weighted logistic fit of `1(cost = 0)` and a
/// weighted log-normal fit on the positive-cost rows, both over the same
/// design. Data without zeros degrade gracefully to a zero-part pinned at
/// the separation guard (probability effectively zero).
pub fn fit_two_part_cost(
    costs: &[f64],
    covariates: &DesignMatrix,
    treatment: &[f64],
    survival_term: Option<&[f64]>,
    weights: &[f64],
) -> Result<CostModelFit, ModelError> {
    let n = costs.len();
    if n == 0 || covariates.n_rows() != n || treatment.len() != n || weights.len() != n {
        return Err(ModelError::InvalidInput("input lengths disagree".into()));
    }
    if costs.iter().zip(weights).any(|(&c, &w)| w > 0.0 && c < 0.0) {
        return Err(ModelError::InvalidInput("costs must be nonnegative".into()));
    }
    let any_positive = costs.iter().zip(weights).any(|(&c, &w)| w > 0.0 && c > 0.0);
    if !any_positive {
        return Err(ModelError::NoPositiveCosts);
    }
    let any_zero = costs.iter().zip(weights).any(|(&c, &w)| w > 0.0 && c == 0.0);

    let p_zero_design = covariates.n_cols() + 1 + usize::from(survival_term.is_some());
    let zero_part = if any_zero {
        let treat_on = treatment_varies(treatment, weights);
        // Design without the intercept column; fit_logistic adds it.
        let mut flat = Vec::new();
        for i in 0..n {
            flat.extend_from_slice(covariates.row(i));
            if treat_on {
                flat.push(treatment[i]);
            }
            if let Some(s) = survival_term {
                flat.push(s[i]);
            }
        }
        let cols = p_zero_design - usize::from(!treat_on);
        let design = DesignMatrix::from_flat(flat, n, cols);
        let outcomes: Vec<bool> = costs.iter().map(|&c| c == 0.0).collect();
        let mut fit = fit_logistic(&outcomes, &design, weights)?;
        if !treat_on {
            fit.coef.insert(1 + covariates.n_cols(), 0.0);
        }
        fit
    } else {
        let mut coef = vec![0.0; p_zero_design + 1];
        coef[0] = -SEPARATION_GUARD;
        LogisticFit::from_parameters(coef)
    };

    let masked: Vec<f64> = weights
        .iter()
        .zip(costs)
        .map(|(&w, &c)| if c > 0.0 { w } else { 0.0 })
        .collect();
    // Replace the zero costs by a placeholder so the log never sees them;
    // their weight is zero.
    let positive: Vec<f64> = costs.iter().map(|&c| if c > 0.0 { c } else { 1.0 }).collect();
    let mut fit = fit_lognormal_cost(&positive, covariates, treatment, survival_term, &masked)?;
    fit.variant = CostVariant::TwoPart;
    fit.zero_part = Some(zero_part);
    Ok(fit)
}
