//! Product-limit (Kaplan-Meier) estimator with optional stratification.

use super::ModelError;

/// Per-stratum step function of the product-limit estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KmStratum {
    /// Distinct event times, ascending.
    pub event_times: Vec<f64>,
    /// Product-limit survival value at (and after) each event time.
    pub survival: Vec<f64>,
    /// Number at risk at each event time.
    pub n_risk: Vec<f64>,
    /// Number of events at each event time.
    pub n_event: Vec<f64>,
    /// Cumulative Nelson-Aalen hazard at each event time.
    pub cumulative_hazard: Vec<f64>,
    pub n_observations: usize,
}

impl KmStratum {
    /// Right-continuous survival `S(t)`: product over event times `<= t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.event_times.partition_point(|&e| e <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// Left limit `S(t-)`: product over event times strictly below `t`.
    /// This estimates `P(T >= t)`.
    pub fn survival_before(&self, t: f64) -> f64 {
        let idx = self.event_times.partition_point(|&e| e < t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// `exp(-H(t-))` with the Nelson-Aalen cumulative hazard over event
    /// times strictly below `t`; the exponential-hazard counterpart of
    /// [`Self::survival_before`].
    pub fn na_survival_before(&self, t: f64) -> f64 {
        let idx = self.event_times.partition_point(|&e| e < t);
        if idx == 0 {
            1.0
        } else {
            (-self.cumulative_hazard[idx - 1]).exp()
        }
    }
}

/// Stratified Kaplan-Meier fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierFit {
    pub strata: Vec<KmStratum>,
}

impl KaplanMeierFit {
    pub fn stratum(&self, idx: usize) -> &KmStratum {
        &self.strata[idx]
    }

    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }
}

/// Fits the product-limit estimator per stratum. `strata`, when given, maps
/// each observation to a stratum index `0..n_strata`; every stratum must be
/// populated. With `strata = None` a single stratum is used.
pub fn fit_kaplan_meier(
    times: &[f64],
    events: &[bool],
    strata: Option<&[usize]>,
) -> Result<KaplanMeierFit, ModelError> {
    let n = times.len();
    if n == 0 {
        return Err(ModelError::InvalidInput("no observations".into()));
    }
    if events.len() != n {
        return Err(ModelError::InvalidInput("times and event flags differ in length".into()));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(ModelError::InvalidInput("strata labels differ in length".into()));
        }
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(ModelError::InvalidInput("times must be finite and nonnegative".into()));
    }
    let n_strata = strata.map_or(1, |s| s.iter().max().map_or(1, |m| m + 1));

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for i in 0..n {
        members[strata.map_or(0, |s| s[i])].push(i);
    }

    let mut out = Vec::with_capacity(n_strata);
    for (label, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            return Err(ModelError::EmptyStratum(label));
        }
        let mut order = rows.clone();
        order.sort_unstable_by(|&a, &b| times[a].total_cmp(&times[b]));

        let mut stratum = KmStratum {
            event_times: Vec::new(),
            survival: Vec::new(),
            n_risk: Vec::new(),
            n_event: Vec::new(),
            cumulative_hazard: Vec::new(),
            n_observations: rows.len(),
        };
        let mut at_risk = rows.len() as f64;
        let mut surv = 1.0;
        let mut hazard = 0.0;
        let mut i = 0;
        while i < order.len() {
            let t = times[order[i]];
            let mut j = i;
            let mut d = 0.0;
            let mut group = 0.0;
            while j < order.len() && times[order[j]] == t {
                if events[order[j]] {
                    d += 1.0;
                }
                group += 1.0;
                j += 1;
            }
            if d > 0.0 {
                // (n - d) / n keeps the product bit-identical to the hand
                // form 2/3 * 1/2 * ...
                surv *= (at_risk - d) / at_risk;
                hazard += d / at_risk;
                stratum.event_times.push(t);
                stratum.survival.push(surv);
                stratum.n_risk.push(at_risk);
                stratum.n_event.push(d);
                stratum.cumulative_hazard.push(hazard);
            }
            at_risk -= group;
            i = j;
        }
        debug_assert!(stratum.survival.windows(2).all(|w| w[1] <= w[0]));
        out.push(stratum);
    }
    Ok(KaplanMeierFit { strata: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_events_match_hand_product_limit() {
        let fit = fit_kaplan_meier(&[1.0, 2.0, 3.0], &[true, true, true], None).unwrap();
        let s = fit.stratum(0);
        assert_eq!(s.survival_at(1.0), 2.0 / 3.0);
        assert_eq!(s.survival_at(2.0), 2.0 / 3.0 * 0.5);
        assert_eq!(s.survival_at(3.0), 0.0);
        assert_eq!(s.survival_at(0.5), 1.0);
        assert_eq!(s.survival_before(1.0), 1.0);
    }

    #[test]
    fn censoring_shrinks_the_risk_set() {
        let fit = fit_kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true], None).unwrap();
        let s = fit.stratum(0);
        // risk set {3} at t = 3 after the censoring at t = 2
        assert_eq!(s.survival_at(1.0), 2.0 / 3.0);
        assert_eq!(s.survival_at(2.5), 2.0 / 3.0);
        assert_eq!(s.survival_at(3.0), 0.0);
    }

    #[test]
    fn all_censored_keeps_survival_at_one() {
        let fit = fit_kaplan_meier(&[1.0, 5.0, 9.0], &[false, false, false], None).unwrap();
        let s = fit.stratum(0);
        for t in [0.0, 1.0, 10.0, 1e6] {
            assert_eq!(s.survival_at(t), 1.0);
        }
    }

    #[test]
    fn strata_are_fit_independently() {
        let times = [1.0, 2.0, 1.0, 2.0, 3.0];
        let events = [true, true, true, false, true];
        let strata = [0, 0, 1, 1, 1];
        let fit = fit_kaplan_meier(&times, &events, Some(&strata)).unwrap();
        let alone0 = fit_kaplan_meier(&[1.0, 2.0], &[true, true], None).unwrap();
        let alone1 = fit_kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true], None).unwrap();
        assert_eq!(fit.stratum(0), alone0.stratum(0));
        assert_eq!(fit.stratum(1), alone1.stratum(0));
    }

    #[test]
    fn empty_stratum_is_rejected() {
        let err = fit_kaplan_meier(&[1.0, 2.0], &[true, true], Some(&[0, 2])).unwrap_err();
        assert_eq!(err, ModelError::EmptyStratum(1));
    }

    #[test]
    fn tied_event_and_censoring_share_the_risk_set() {
        // Censored subject at t = 2 is still at risk for the event at t = 2.
        let fit = fit_kaplan_meier(&[2.0, 2.0, 3.0], &[true, false, true], None).unwrap();
        let s = fit.stratum(0);
        assert_eq!(s.survival_at(2.0), 2.0 / 3.0);
        assert_eq!(s.survival_at(3.0), 0.0);
    }
}
