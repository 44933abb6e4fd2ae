//! Truncated linear mapping from uncertainty scores to label-smoothing values,
//! and the solver that picks the scale so the smoothing values average to a
//! fixed target.
//!
//! The mapping is `v = min(beta * u, v_t)`. Given scores `u_i` and a target
//! mean `alpha`, `solve_beta` finds the smallest `beta >= 0` with
//! `mean_i min(beta * u_i, v_t) = alpha`. The mean as a function of `beta` is
//! non-decreasing and piecewise linear with breakpoints at `v_t / u_i`, so the
//! solve is exact: walk the breakpoints in order and solve the one linear
//! segment that brackets the target.

use crate::error::CoreError;

/// Maps one uncertainty score to a smoothing value: `min(beta * u, v_t)`.
///
/// Non-decreasing in both `u` and `beta`; total for `beta >= 0`, `0 < v_t < 1`.
pub fn map_uncertainty(u: f64, beta: f64, v_t: f64) -> f64 {
    (beta * u).min(v_t)
}

/// Neumaier compensated summation. Keeps the mean-constraint residual well
/// below the 1e-12 contract even for the longest supported score lists.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean of the mapped values at a given scale, computed with compensated
/// summation. This is `g(beta)` in the solver's contract.
pub fn mapped_mean(us: &[f64], beta: f64, v_t: f64) -> f64 {
    compensated_sum(us.iter().map(|&u| map_uncertainty(u, beta, v_t))) / us.len() as f64
}

/// Largest achievable mean smoothing value: `v_t * (#positive scores) / n`.
pub fn mean_supremum(us: &[f64], v_t: f64) -> f64 {
    let positive = us.iter().filter(|&&u| u > 0.0).count();
    v_t * positive as f64 / us.len() as f64
}

fn validate_scores(us: &[f64]) -> Result<(), CoreError> {
    for (i, &u) in us.iter().enumerate() {
        if !u.is_finite() || u < 0.0 {
            return Err(CoreError::InvalidUncertainty { id: format!("#{i}"), value: u });
        }
    }
    Ok(())
}

/// Solves for the smallest `beta >= 0` with `mean_i min(beta*u_i, v_t) = alpha`.
///
/// Scores may be any non-negative reals; normalization to [0, 1] happens at
/// annotation time, not here. Errors with `EmptyDataset` on an empty list and
/// `InfeasibleConstraint` when `alpha` lies outside `[0, mean_supremum]`.
pub fn solve_beta(us: &[f64], alpha: f64, v_t: f64) -> Result<f64, CoreError> {
    if us.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    if !(0.0 < v_t && v_t < 1.0) {
        return Err(CoreError::InvalidCap(v_t));
    }
    validate_scores(us)?;

    let n = us.len() as f64;
    let supremum = mean_supremum(us, v_t);
    if !alpha.is_finite() || alpha < 0.0 || alpha > supremum {
        return Err(CoreError::InfeasibleConstraint { alpha, supremum });
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }

    // Positive scores ascending; prefix[i] is a compensated sum of the i
    // smallest, so the still-linear mass after truncating the k largest is
    // prefix[m - k] with no error-accumulating subtraction.
    let mut pos: Vec<f64> = us.iter().copied().filter(|&u| u > 0.0).collect();
    pos.sort_by(|a, b| a.partial_cmp(b).expect("scores validated finite"));
    let m = pos.len();
    let mut prefix = vec![0.0f64; m + 1];
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 0..m {
        let x = pos[i];
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        prefix[i + 1] = sum + comp;
    }

    // Walk segments in increasing beta. With k scores truncated, the mean is
    // (beta * prefix[m-k] + k * v_t) / n on [previous breakpoint, v_t/pos[m-1-k]].
    let mut low = 0.0f64;
    for k in 0..m {
        let active_sum = prefix[m - k];
        let high = v_t / pos[m - 1 - k];
        let candidate = (alpha * n - k as f64 * v_t) / active_sum;
        if candidate <= high {
            return Ok(candidate.max(low));
        }
        low = high;
    }
    // Every positive score truncated: the mean has saturated at the supremum,
    // and `low` is the smallest beta that reaches it.
    Ok(low)
}
