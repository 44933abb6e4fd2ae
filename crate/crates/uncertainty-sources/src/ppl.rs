//! Training-time uncertainty from perplexity ratios.
//!
//! Instead of asking a judge, a training run can read each sample's
//! uncertainty off the model itself: a sample whose perplexity is high
//! relative to the recent average is treated as more uncertain. The mapping
//! is linear in the ratio and anchored so that a perfectly average sample
//! gets exactly the target mean smoothing `alpha`, truncated at `v_t` like
//! the judge-driven mapping.

use crate::error::SourceError;

/// Exponential moving average of per-sample perplexity. One state per
/// training run, owned and updated by the training thread.
#[derive(Debug, Clone)]
pub struct PplState {
    running_mean: f64,
    initialized: bool,
    rho: f64,
}

impl PplState {
    /// `rho` is the EMA decay: the fraction of the old mean kept per update.
    pub fn new(rho: f64) -> Self {
        assert!(
            rho > 0.0 && rho < 1.0,
            "EMA decay must lie strictly inside (0, 1), got {rho}"
        );
        Self {
            running_mean: 0.0,
            initialized: false,
            rho,
        }
    }

    /// The default decay keeps roughly the last hundred samples in view.
    pub fn with_default_decay() -> Self {
        Self::new(0.99)
    }

    pub fn running_mean(&self) -> Option<f64> {
        self.initialized.then_some(self.running_mean)
    }
}

impl Default for PplState {
    fn default() -> Self {
        Self::with_default_decay()
    }
}

/// Maps one sample's perplexity to its smoothing value and advances the
/// running mean.
///
/// The first observed sample initializes the mean and gets `alpha` (ratio 1
/// by definition). Afterwards `v = min(alpha * ppl / mean, v_t)`, computed
/// against the mean *before* this sample is folded in.
pub fn ppl_smoothing(
    ppl: f64,
    state: &mut PplState,
    alpha: f64,
    v_t: f64,
) -> Result<f64, SourceError> {
    assert!(
        alpha > 0.0 && alpha < v_t,
        "alpha must lie in (0, v_t), got alpha={alpha}, v_t={v_t}"
    );
    if !(ppl.is_finite() && ppl > 0.0) {
        return Err(SourceError::NonPositivePpl(ppl));
    }
    if !state.initialized {
        state.running_mean = ppl;
        state.initialized = true;
        return Ok(alpha);
    }
    let v = (alpha * ppl / state.running_mean).min(v_t);
    state.running_mean = state.rho * state.running_mean + (1.0 - state.rho) * ppl;
    Ok(v)
}
