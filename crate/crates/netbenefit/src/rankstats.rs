//! Individual net benefit and the nonparametric two-sample estimator of the
//! net benefit separation.
//!
//! The separation `P(B_1 > B_0)` between two samples of individual net
//! benefits is computed through the scaled rank-sum identity, which equals
//! the pairwise double-sum count exactly (ties counted one half) at
//! `O(n log n)` cost.

use thiserror::Error;

/// Individual net benefit `lambda * outcome - cost` in currency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InbValue(pub f64);

/// Two-sample net benefit separation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbsEstimate {
    /// Estimated `P(B_1 > B_0)`, in `[0, 1]`.
    pub value: f64,
    pub n_control: usize,
    pub n_treated: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("NEGATIVE_LAMBDA: willingness to pay must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("EMPTY_INPUT: ranks of an empty sequence are undefined")]
    EmptyInput,
    #[error("EMPTY_ARM: both arms must contain at least one value")]
    EmptyArm,
}

/// `lambda * outcome - cost` for one subject or draw.
pub fn individual_net_benefit(outcome: f64, cost: f64, lambda: f64) -> Result<InbValue, RankError> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(RankError::NegativeLambda(lambda));
    }
    Ok(InbValue(lambda * outcome - cost))
}

/// 1-based ranks with ties replaced by the mean of the ranks they span.
///
/// The rank sum is always `n(n+1)/2`. Values must not be NaN.
pub fn midranks(values: &[f64]) -> Result<Vec<f64>, RankError> {
    if values.is_empty() {
        return Err(RankError::EmptyInput);
    }
    debug_assert!(values.iter().all(|v| !v.is_nan()));
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) hold ranks start+1 ..= end
        let midrank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = midrank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Two-sample net benefit separation from the individual net benefits of the
/// control arm (`inb_control`) and the treated arm (`inb_treated`).
///
/// Computed as the scaled rank-sum statistic over the pooled midranks; with
/// no ties this equals the fraction of cross-arm pairs where the treated
/// value is strictly larger, and each tied cross-arm pair contributes 1/2.
pub fn nbs_two_sample(inb_control: &[f64], inb_treated: &[f64]) -> Result<NbsEstimate, RankError> {
    let n0 = inb_control.len();
    let n1 = inb_treated.len();
    if n0 == 0 || n1 == 0 {
        return Err(RankError::EmptyArm);
    }
    let mut pooled = Vec::with_capacity(n0 + n1);
    pooled.extend_from_slice(inb_control);
    pooled.extend_from_slice(inb_treated);
    let ranks = midranks(&pooled)?;
    // Rank sums over integers and exact halves stay exact in f64 well past
    // any realistic sample size, so the only rounding is the final division.
    let treated_rank_sum: f64 = ranks[n0..].iter().sum();
    let u = treated_rank_sum - (n1 as f64) * (n1 as f64 + 1.0) / 2.0;
    let value = u / (n0 as f64 * n1 as f64);
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&value));
    Ok(NbsEstimate { value, n_control: n0, n_treated: n1 })
}

/// Pairwise count form of the separation: `mean over pairs of
/// [1(b1 > b0) + 0.5 * 1(b1 == b0)]`, evaluated in `O(n log n)` by sorting
/// the control arm. Used to cross-check the rank-sum form.
#[cfg(any(test, debug_assertions))]
pub(crate) fn nbs_pair_count(inb_control: &[f64], inb_treated: &[f64]) -> f64 {
    let mut sorted0 = inb_control.to_vec();
    sorted0.sort_unstable_by(f64::total_cmp);
    let mut total = 0.0;
    for &b1 in inb_treated {
        let below = sorted0.partition_point(|&b0| b0 < b1);
        let below_or_equal = sorted0.partition_point(|&b0| b0 <= b1);
        total += below as f64 + 0.5 * (below_or_equal - below) as f64;
    }
    total / (inb_control.len() as f64 * inb_treated.len() as f64)
}
