//! Label-smoothed cross-entropy over autoregressive token predictions, with
//! exact analytic gradients.
//!
//! The target distribution mixes the one-hot target with a uniform
//! distribution over the full vocabulary: `q_k = (1-v) * [k == target] + v/V`.
//! The per-token loss is `-sum_k q_k * log softmax(logits)_k`, evaluated with
//! log-sum-exp stabilization so logits with magnitude up to 1e4 cannot
//! overflow. All functions are pure and generic over the float width; the
//! training path instantiates `f32`, gradient-checking tests instantiate
//! `f64`.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};
use thiserror::Error;

/// Float widths the model and loss math run at.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Debug + Default + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LossError {
    #[error("loss mask has no true entries")]
    EmptyMask,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// One sample's sequence loss inputs: a T x V logits matrix (row-major), the
/// target token per position, a mask selecting the positions that count, and
/// the sample's single smoothing value.
pub struct SequenceLossSpec<'a, F> {
    pub logits: &'a [F],
    pub vocab_size: usize,
    pub targets: &'a [usize],
    pub loss_mask: &'a [bool],
    pub smoothing: F,
}

#[inline]
fn log_sum_exp<F: Scalar>(row: &[F]) -> F {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let sum: F = row.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Smoothed cross-entropy of one logits row against the mixed target.
///
/// With `z = logits`, `lse = log sum exp(z)` this is
/// `lse - (1-v) * z_target - (v/V) * sum_k z_k`.
pub fn smoothed_token_loss<F: Scalar>(logits_row: &[F], target: usize, v: F) -> F {
    debug_assert!(logits_row.len() >= 2);
    debug_assert!(target < logits_row.len());
    debug_assert!(v >= F::zero() && v <= F::one());
    let vocab = F::from_usize(logits_row.len()).unwrap();
    let lse = log_sum_exp(logits_row);
    let sum: F = logits_row.iter().copied().sum();
    lse - (F::one() - v) * logits_row[target] - v / vocab * sum
}

/// Gradient of `smoothed_token_loss` with respect to the logits: `p - q`.
pub fn smoothed_token_grad<F: Scalar>(logits_row: &[F], target: usize, v: F) -> Vec<F> {
    let mut grad = vec![F::zero(); logits_row.len()];
    smoothed_token_loss_grad_into(logits_row, target, v, &mut grad);
    grad
}

/// Single-pass loss + gradient, writing `p - q` into `grad_out`. The shared
/// log-sum-exp makes this the path the training loop uses.
pub fn smoothed_token_loss_grad_into<F: Scalar>(
    logits_row: &[F],
    target: usize,
    v: F,
    grad_out: &mut [F],
) -> F {
    debug_assert_eq!(logits_row.len(), grad_out.len());
    debug_assert!(target < logits_row.len());
    let vocab = F::from_usize(logits_row.len()).unwrap();
    let uniform = v / vocab;
    let lse = log_sum_exp(logits_row);
    let mut sum = F::zero();
    for (g, &z) in grad_out.iter_mut().zip(logits_row) {
        sum += z;
        *g = (z - lse).exp() - uniform;
    }
    grad_out[target] -= F::one() - v;
    lse - (F::one() - v) * logits_row[target] - uniform * sum
}

/// Mean of the per-token smoothed loss over masked positions, all positions
/// sharing the sample's smoothing value.
pub fn sequence_loss<F: Scalar>(spec: &SequenceLossSpec<'_, F>) -> Result<F, LossError> {
    let v_size = spec.vocab_size;
    let positions = spec.targets.len();
    if spec.logits.len() != positions * v_size {
        return Err(LossError::ShapeMismatch(format!(
            "logits has {} entries, expected {} positions x {} vocab",
            spec.logits.len(),
            positions,
            v_size
        )));
    }
    if spec.loss_mask.len() != positions {
        return Err(LossError::ShapeMismatch(format!(
            "mask length {} != targets length {}",
            spec.loss_mask.len(),
            positions
        )));
    }
    let mut total = F::zero();
    let mut count = 0usize;
    for t in 0..positions {
        if !spec.loss_mask[t] {
            continue;
        }
        let row = &spec.logits[t * v_size..(t + 1) * v_size];
        total += smoothed_token_loss(row, spec.targets[t], spec.smoothing);
        count += 1;
    }
    if count == 0 {
        return Err(LossError::EmptyMask);
    }
    Ok(total / F::from_usize(count).unwrap())
}
