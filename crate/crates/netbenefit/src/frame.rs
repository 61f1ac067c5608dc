//! Internal columnar view of a validated dataset.
//!
//! Bootstrap resampling gathers columns by index instead of cloning
//! row structs, which keeps the replicate loop allocation-light.

use crate::domain::ValidatedDataset;

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub n: usize,
    pub n_cov: usize,
    pub treatment: Vec<u8>,
    pub time: Vec<f64>,
    pub survival_censored: Vec<bool>,
    pub cost_censored: Vec<bool>,
    /// NaN where the cost is censored; guarded by `cost_censored`.
    pub cost: Vec<f64>,
    /// Row-major `n x n_cov` covariate matrix.
    pub covariates: Vec<f64>,
    pub tau: f64,
}

impl Frame {
    pub fn from_dataset(ds: &ValidatedDataset) -> Frame {
        let n = ds.observations.len();
        let n_cov = ds.covariate_names.len();
        let mut frame = Frame {
            n,
            n_cov,
            treatment: Vec::with_capacity(n),
            time: Vec::with_capacity(n),
            survival_censored: Vec::with_capacity(n),
            cost_censored: Vec::with_capacity(n),
            cost: Vec::with_capacity(n),
            covariates: Vec::with_capacity(n * n_cov),
            tau: ds.tau,
        };
        for o in &ds.observations {
            frame.treatment.push(o.treatment);
            frame.time.push(o.observed_time);
            frame.survival_censored.push(o.survival_censored);
            frame.cost_censored.push(o.cost_censored);
            frame.cost.push(o.cost.unwrap_or(f64::NAN));
            frame.covariates.extend_from_slice(&o.covariates);
        }
        frame
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_cov..(i + 1) * self.n_cov]
    }

    /// Gathers the given rows into a new frame (bootstrap resample).
    pub fn gather(&self, rows: &[usize]) -> Frame {
        let n = rows.len();
        let mut out = Frame {
            n,
            n_cov: self.n_cov,
            treatment: Vec::with_capacity(n),
            time: Vec::with_capacity(n),
            survival_censored: Vec::with_capacity(n),
            cost_censored: Vec::with_capacity(n),
            cost: Vec::with_capacity(n),
            covariates: Vec::with_capacity(n * self.n_cov),
            tau: self.tau,
        };
        for &i in rows {
            out.treatment.push(self.treatment[i]);
            out.time.push(self.time[i]);
            out.survival_censored.push(self.survival_censored[i]);
            out.cost_censored.push(self.cost_censored[i]);
            out.cost.push(self.cost[i]);
            out.covariates.extend_from_slice(self.covariate_row(i));
        }
        out
    }

    pub fn arm_sizes(&self) -> (usize, usize) {
        let n1 = self.treatment.iter().filter(|&&a| a == 1).count();
        (self.n - n1, n1)
    }

    /// Horizon-limited time `min(time, tau)`; the survival value cost
    /// models see, meaningful where the cost is observed.
    pub fn horizon_time(&self, i: usize) -> f64 {
        self.time[i].min(self.tau)
    }
}
