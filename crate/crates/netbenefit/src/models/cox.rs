//! Stratified Cox proportional hazards regression with Breslow tie handling
//! and the Breslow baseline cumulative hazard per stratum.
//!
//! Used here as the censoring-time model behind inverse
//! probability-of-censoring weights, so the "event" indicator marks a
//! censored cost, not a clinical event.

use super::linalg::solve_ridged;
use super::{ConvergenceInfo, DesignMatrix, ModelError, GRADIENT_TOLERANCE, MAX_ITERATIONS};

/// Breslow cumulative baseline hazard over one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineHazard {
    /// Distinct event times, ascending.
    pub event_times: Vec<f64>,
    /// Cumulative hazard at (and after) each event time.
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    /// Cumulative hazard over event times strictly below `t`.
    pub fn cumulative_before(&self, t: f64) -> f64 {
        let idx = self.event_times.partition_point(|&e| e < t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }
}

/// Fitted stratified Cox model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    /// Partial-likelihood coefficient per covariate column (empty when the
    /// model has no covariates).
    pub coef: Vec<f64>,
    pub convergence: ConvergenceInfo,
    pub(crate) baselines: Vec<BaselineHazard>,
}

impl CoxFit {
    pub fn n_strata(&self) -> usize {
        self.baselines.len()
    }

    pub fn baseline(&self, stratum: usize) -> &BaselineHazard {
        &self.baselines[stratum]
    }

    pub fn linear_predictor(&self, covariates: &[f64]) -> f64 {
        debug_assert_eq!(covariates.len(), self.coef.len());
        covariates.iter().zip(&self.coef).map(|(x, b)| x * b).sum()
    }

    /// Model-based survival left limit `exp(-exp(lp) * H0(t-))`, the
    /// probability that the modelled time is at least `t`.
    pub fn survival_before(&self, stratum: usize, t: f64, covariates: &[f64]) -> f64 {
        let h = self.baselines[stratum].cumulative_before(t);
        (-(self.linear_predictor(covariates).exp()) * h).exp()
    }
}

/// Fits the stratified Cox model by Newton iteration on the Breslow partial
/// likelihood. `strata`, when given, maps observations to stratum indices
/// `0..n_strata`; ties share the full risk-set denominator.
pub fn fit_stratified_cox(
    times: &[f64],
    events: &[bool],
    strata: Option<&[usize]>,
    covariates: &DesignMatrix,
) -> Result<CoxFit, ModelError> {
    let n = times.len();
    if n == 0 || events.len() != n || covariates.n_rows() != n {
        return Err(ModelError::InvalidInput("input lengths disagree".into()));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(ModelError::InvalidInput("strata labels differ in length".into()));
        }
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(ModelError::InvalidInput("times must be finite and nonnegative".into()));
    }
    if !events.iter().any(|&e| e) {
        return Err(ModelError::NoEvents);
    }
    let n_strata = strata.map_or(1, |s| s.iter().max().map_or(1, |m| m + 1));
    let p = covariates.n_cols();

    // Stratum membership, each sorted by time descending so a single sweep
    // accumulates risk-set sums.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for i in 0..n {
        members[strata.map_or(0, |s| s[i])].push(i);
    }
    for (label, rows) in members.iter_mut().enumerate() {
        if rows.is_empty() {
            return Err(ModelError::EmptyStratum(label));
        }
        rows.sort_unstable_by(|&a, &b| times[b].total_cmp(&times[a]));
    }

    let mut coef = vec![0.0; p];
    let mut ll;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    if p > 0 {
        ll = partial_log_likelihood(times, events, &members, covariates, &coef);
        let mut step = Vec::new();
        let mut converged = false;
        for iter in 1..=MAX_ITERATIONS {
            let (score, info) = partial_derivatives(times, events, &members, covariates, &coef);
            grad_norm = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if grad_norm < GRADIENT_TOLERANCE {
                iterations = iter - 1;
                converged = true;
                break;
            }
            if !solve_ridged(&info, &score, p, &mut step) {
                return Err(ModelError::SingularInformation);
            }
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = coef.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
                let trial_ll = partial_log_likelihood(times, events, &members, covariates, &trial);
                if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                    coef = trial;
                    ll = trial_ll;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(ModelError::Nonconvergence { iterations: iter, gradient_norm: grad_norm });
            }
            iterations = iter;
        }
        if !converged {
            let (score, _) = partial_derivatives(times, events, &members, covariates, &coef);
            grad_norm = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if grad_norm >= GRADIENT_TOLERANCE {
                return Err(ModelError::Nonconvergence {
                    iterations: MAX_ITERATIONS,
                    gradient_norm: grad_norm,
                });
            }
        }
        debug_assert!(grad_norm < 1e-6);
    } else {
        grad_norm = 0.0;
        ll = partial_log_likelihood(times, events, &members, covariates, &coef);
    }

    let baselines = breslow_baselines(times, events, &members, covariates, &coef);
    Ok(CoxFit {
        coef,
        convergence: ConvergenceInfo { iterations, gradient_norm: grad_norm, log_likelihood: ll },
        baselines,
    })
}

/// Shared sweep state: linear predictors stabilized by the stratum maximum
/// so the exponentials cannot overflow.
fn linear_predictors(covariates: &DesignMatrix, coef: &[f64], rows: &[usize]) -> (Vec<f64>, f64) {
    let mut eta = Vec::with_capacity(rows.len());
    let mut max = f64::NEG_INFINITY;
    for &i in rows {
        let e: f64 = covariates.row(i).iter().zip(coef).map(|(x, b)| x * b).sum();
        max = max.max(e);
        eta.push(e);
    }
    (eta, max)
}

fn partial_log_likelihood(
    times: &[f64],
    events: &[bool],
    members: &[Vec<usize>],
    covariates: &DesignMatrix,
    coef: &[f64],
) -> f64 {
    let mut ll = 0.0;
    for rows in members {
        let (eta, eta_max) = linear_predictors(covariates, coef, rows);
        let mut s0 = 0.0;
        let mut r = 0;
        while r < rows.len() {
            let t = times[rows[r]];
            let mut q = r;
            let mut d = 0.0;
            let mut event_eta_sum = 0.0;
            while q < rows.len() && times[rows[q]] == t {
                s0 += (eta[q] - eta_max).exp();
                if events[rows[q]] {
                    d += 1.0;
                    event_eta_sum += eta[q];
                }
                q += 1;
            }
            if d > 0.0 {
                ll += event_eta_sum - d * (s0.ln() + eta_max);
            }
            r = q;
        }
    }
    ll
}

/// Score vector and observed information matrix of the Breslow partial
/// likelihood.
fn partial_derivatives(
    times: &[f64],
    events: &[bool],
    members: &[Vec<usize>],
    covariates: &DesignMatrix,
    coef: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let p = coef.len();
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    for rows in members {
        let (eta, eta_max) = linear_predictors(covariates, coef, rows);
        let mut s0 = 0.0;
        s1.iter_mut().for_each(|v| *v = 0.0);
        s2.iter_mut().for_each(|v| *v = 0.0);
        let mut r = 0;
        while r < rows.len() {
            let t = times[rows[r]];
            let mut q = r;
            let mut d = 0.0;
            while q < rows.len() && times[rows[q]] == t {
                let i = rows[q];
                let w = (eta[q] - eta_max).exp();
                let x = covariates.row(i);
                s0 += w;
                for j in 0..p {
                    s1[j] += w * x[j];
                    for m in j..p {
                        s2[j * p + m] += w * x[j] * x[m];
                    }
                }
                if events[i] {
                    d += 1.0;
                    for j in 0..p {
                        score[j] += x[j];
                    }
                }
                q += 1;
            }
            if d > 0.0 {
                for j in 0..p {
                    let mean_j = s1[j] / s0;
                    score[j] -= d * mean_j;
                    for m in j..p {
                        info[j * p + m] += d * (s2[j * p + m] / s0 - mean_j * s1[m] / s0);
                    }
                }
            }
            r = q;
        }
    }
    for j in 0..p {
        for m in (j + 1)..p {
            info[m * p + j] = info[j * p + m];
        }
    }
    (score, info)
}

fn breslow_baselines(
    times: &[f64],
    events: &[bool],
    members: &[Vec<usize>],
    covariates: &DesignMatrix,
    coef: &[f64],
) -> Vec<BaselineHazard> {
    let mut out = Vec::with_capacity(members.len());
    for rows in members {
        let (eta, eta_max) = linear_predictors(covariates, coef, rows);
        let mut s0 = 0.0;
        let mut increments: Vec<(f64, f64)> = Vec::new();
        let mut r = 0;
        while r < rows.len() {
            let t = times[rows[r]];
            let mut q = r;
            let mut d = 0.0;
            while q < rows.len() && times[rows[q]] == t {
                s0 += (eta[q] - eta_max).exp();
                if events[rows[q]] {
                    d += 1.0;
                }
                q += 1;
            }
            if d > 0.0 {
                increments.push((t, d / s0 * (-eta_max).exp()));
            }
            r = q;
        }
        increments.reverse(); // ascending in time
        let mut cumulative = 0.0;
        let mut baseline =
            BaselineHazard { event_times: Vec::with_capacity(increments.len()), cumulative: Vec::new() };
        for (t, inc) in increments {
            cumulative += inc;
            baseline.event_times.push(t);
            baseline.cumulative.push(cumulative);
        }
        debug_assert!(baseline.cumulative.windows(2).all(|w| w[1] >= w[0]));
        out.push(baseline);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_kaplan_meier;

    /// Independent O(n^2) Breslow partial log likelihood for the oracle.
    fn naive_partial_ll(times: &[f64], events: &[bool], cov: &[f64], beta: f64) -> f64 {
        let mut ll = 0.0;
        for i in 0..times.len() {
            if !events[i] {
                continue;
            }
            let denom: f64 = (0..times.len())
                .filter(|&k| times[k] >= times[i])
                .map(|k| (beta * cov[k]).exp())
                .sum();
            ll += beta * cov[i] - denom.ln();
        }
        ll
    }

    #[test]
    fn ten_row_fit_matches_grid_search() {
        let times = [2.0, 3.0, 5.0, 7.0, 8.0, 1.0, 4.0, 6.0, 9.0, 10.0];
        let events = [true, true, false, true, true, true, false, true, true, false];
        let cov = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let fit =
            fit_stratified_cox(&times, &events, None, &DesignMatrix::from_column(&cov)).unwrap();

        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut beta = -3.0;
        while beta <= 3.0 {
            let ll = naive_partial_ll(&times, &events, &cov, beta);
            if ll > best.0 {
                best = (ll, beta);
            }
            beta += 1e-4;
        }
        assert!(
            (fit.coef[0] - best.1).abs() <= 1e-4 + 1e-9,
            "fit {} vs grid {}",
            fit.coef[0],
            best.1
        );
        assert!(fit.convergence.gradient_norm < 1e-6);
    }

    #[test]
    fn zero_covariates_reduce_to_breslow_survival() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let events = [true, false, true, false];
        let fit = fit_stratified_cox(&times, &events, None, &DesignMatrix::empty(4)).unwrap();
        assert!(fit.coef.is_empty());
        let b = fit.baseline(0);
        assert_eq!(b.event_times, vec![1.0, 3.0]);
        assert!((b.cumulative[0] - 0.25).abs() < 1e-15);
        assert!((b.cumulative[1] - 0.75).abs() < 1e-15);
        // survival just after 3: exp(-(1/4 + 1/2))
        assert!((fit.survival_before(0, 3.5, &[]) - (-0.75f64).exp()).abs() < 1e-15);

        // Nelson-Aalen exponential survival from the product-limit machinery
        // agrees with the zero-covariate Cox reduction.
        let km = fit_kaplan_meier(&times, &events, None).unwrap();
        assert!((km.stratum(0).na_survival_before(3.5) - fit.survival_before(0, 3.5, &[])).abs() < 1e-15);
    }

    #[test]
    fn duplicated_strata_match_the_unstratified_fit() {
        let times = [2.0, 3.0, 5.0, 7.0, 1.0, 4.0];
        let events = [true, true, false, true, true, false];
        let cov = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let single =
            fit_stratified_cox(&times, &events, None, &DesignMatrix::from_column(&cov)).unwrap();

        let mut times2 = times.to_vec();
        times2.extend_from_slice(&times);
        let mut events2 = events.to_vec();
        events2.extend_from_slice(&events);
        let mut cov2 = cov.to_vec();
        cov2.extend_from_slice(&cov);
        let strata: Vec<usize> = (0..12).map(|i| i / 6).collect();
        let doubled = fit_stratified_cox(
            &times2,
            &events2,
            Some(&strata),
            &DesignMatrix::from_column(&cov2),
        )
        .unwrap();
        assert!(
            (single.coef[0] - doubled.coef[0]).abs() < 1e-8,
            "{} vs {}",
            single.coef[0],
            doubled.coef[0]
        );
        assert_eq!(doubled.n_strata(), 2);
        // identical data per stratum: identical baselines
        assert_eq!(doubled.baseline(0), doubled.baseline(1));
    }

    #[test]
    fn no_events_is_rejected() {
        let err = fit_stratified_cox(&[1.0, 2.0], &[false, false], None, &DesignMatrix::empty(2))
            .unwrap_err();
        assert_eq!(err, ModelError::NoEvents);
    }

    #[test]
    fn tied_events_use_the_breslow_denominator() {
        // Two events at t = 2 among 3 at risk; both increments share s0.
        let times = [2.0, 2.0, 3.0];
        let events = [true, true, false];
        let fit = fit_stratified_cox(&times, &events, None, &DesignMatrix::empty(3)).unwrap();
        let b = fit.baseline(0);
        assert_eq!(b.event_times, vec![2.0]);
        assert!((b.cumulative[0] - 2.0 / 3.0).abs() < 1e-15);
    }
}
