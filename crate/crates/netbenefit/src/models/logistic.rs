//! Weighted logistic regression by Newton iteration.

use super::linalg::solve_ridged;
use super::{
    ConvergenceInfo, DesignMatrix, ModelError, GRADIENT_TOLERANCE, MAX_ITERATIONS, SEPARATION_GUARD,
};

/// Fitted weighted logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Coefficients: intercept first, then one per covariate column.
    pub coef: Vec<f64>,
    pub convergence: ConvergenceInfo,
}

impl LogisticFit {
    pub fn from_parameters(coef: Vec<f64>) -> Self {
        LogisticFit {
            coef,
            convergence: ConvergenceInfo { iterations: 0, gradient_norm: 0.0, log_likelihood: f64::NAN },
        }
    }

    pub fn probability(&self, covariates: &[f64]) -> f64 {
        debug_assert_eq!(covariates.len() + 1, self.coef.len());
        let mut eta = self.coef[0];
        for (j, &x) in covariates.iter().enumerate() {
            eta += self.coef[1 + j] * x;
        }
        expit(eta)
    }
}

pub(crate) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Fits a weighted logistic regression of binary `outcomes` on
/// `[intercept | covariates]`. Weights must be nonnegative with a positive
/// sum; scaling all weights by a constant leaves the fit unchanged.
pub fn fit_logistic(
    outcomes: &[bool],
    covariates: &DesignMatrix,
    weights: &[f64],
) -> Result<LogisticFit, ModelError> {
    let n = outcomes.len();
    if n == 0 || covariates.n_rows() != n || weights.len() != n {
        return Err(ModelError::InvalidInput("input lengths disagree".into()));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(ModelError::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(ModelError::InvalidInput("weights must not all be zero".into()));
    }
    let p = covariates.n_cols() + 1;
    let row = |i: usize| covariates.row(i);

    let mut beta = vec![0.0; p];
    let mut ll = weighted_log_likelihood(outcomes, covariates, weights, &beta);
    let mut step = Vec::new();
    let mut grad_norm = f64::INFINITY;
    for iter in 1..=MAX_ITERATIONS {
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        for i in 0..n {
            if weights[i] == 0.0 {
                continue;
            }
            let x = row(i);
            let mut eta = beta[0];
            for j in 0..covariates.n_cols() {
                eta += beta[1 + j] * x[j];
            }
            let prob = expit(eta);
            let y = if outcomes[i] { 1.0 } else { 0.0 };
            let resid = weights[i] * (y - prob);
            let curv = weights[i] * prob * (1.0 - prob);
            score[0] += resid;
            info[0] += curv;
            for j in 0..covariates.n_cols() {
                score[1 + j] += resid * x[j];
                info[1 + j] += curv * x[j];
                info[(1 + j) * p] += curv * x[j];
                for m in 0..covariates.n_cols() {
                    info[(1 + j) * p + 1 + m] += curv * x[j] * x[m];
                }
            }
        }
        grad_norm = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if grad_norm < GRADIENT_TOLERANCE {
            return finish(beta, iter - 1, grad_norm, ll);
        }
        if !solve_ridged(&info, &score, p, &mut step) {
            return Err(ModelError::SingularInformation);
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let trial_ll = weighted_log_likelihood(outcomes, covariates, weights, &trial);
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if beta.iter().any(|b| b.abs() > SEPARATION_GUARD) {
            return Err(ModelError::Separation);
        }
        if !accepted {
            return Err(ModelError::Nonconvergence { iterations: iter, gradient_norm: grad_norm });
        }
    }
    Err(ModelError::Nonconvergence { iterations: MAX_ITERATIONS, gradient_norm: grad_norm })
}

fn finish(
    coef: Vec<f64>,
    iterations: usize,
    gradient_norm: f64,
    log_likelihood: f64,
) -> Result<LogisticFit, ModelError> {
    Ok(LogisticFit {
        coef,
        convergence: ConvergenceInfo { iterations, gradient_norm, log_likelihood },
    })
}

fn weighted_log_likelihood(
    outcomes: &[bool],
    covariates: &DesignMatrix,
    weights: &[f64],
    beta: &[f64],
) -> f64 {
    let mut ll = 0.0;
    for i in 0..outcomes.len() {
        if weights[i] == 0.0 {
            continue;
        }
        let x = covariates.row(i);
        let mut eta = beta[0];
        for j in 0..covariates.n_cols() {
            eta += beta[1 + j] * x[j];
        }
        // log p = -softplus(-eta); log(1-p) = -softplus(eta)
        ll -= weights[i] * if outcomes[i] { softplus(-eta) } else { softplus(eta) };
    }
    ll
}
