//! Adam optimizer with bias correction, plus global-norm gradient clipping.

use ual_loss::Scalar;

use crate::config::ModelConfig;
use crate::params::Parameters;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one slot per parameter, plus the step
/// count driving bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub m: Parameters<F>,
    pub v: Parameters<F>,
    pub step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: Parameters::zeros(config),
            v: Parameters::zeros(config),
            step: 0,
        }
    }
}

/// One coordinate-wise Adam update over a tensor: moments first, then the
/// bias-corrected step. Factored out so a scalar oracle can drive it alone.
#[allow(clippy::too_many_arguments)]
pub(crate) fn adam_update_slice<F: Scalar>(
    params: &mut [F],
    grads: &[F],
    m: &mut [F],
    v: &mut [F],
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    bias1: F,
    bias2: F,
) {
    let one = F::one();
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (one - beta1) * g;
        v[i] = beta2 * v[i] + (one - beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Advances every parameter by one bias-corrected Adam step.
pub fn adam_step<F: Scalar>(
    params: &mut Parameters<F>,
    grads: &Parameters<F>,
    state: &mut AdamState<F>,
    lr: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let beta1 = F::from_f64_lossy(ADAM_BETA1);
    let beta2 = F::from_f64_lossy(ADAM_BETA2);
    let eps = F::from_f64_lossy(ADAM_EPS);
    let bias1 = F::from_f64_lossy(1.0 - ADAM_BETA1.powi(t));
    let bias2 = F::from_f64_lossy(1.0 - ADAM_BETA2.powi(t));
    let lr = F::from_f64_lossy(lr);

    let mut param_tensors = params.named_tensors_mut();
    let grad_tensors = grads.named_tensors();
    let mut m_tensors = state.m.named_tensors_mut();
    let mut v_tensors = state.v.named_tensors_mut();
    for i in 0..param_tensors.len() {
        debug_assert_eq!(param_tensors[i].name, grad_tensors[i].name);
        adam_update_slice(
            param_tensors[i].data,
            grad_tensors[i].data,
            m_tensors[i].data,
            v_tensors[i].data,
            lr,
            beta1,
            beta2,
            eps,
            bias1,
            bias2,
        );
    }
}

/// Euclidean norm over every gradient coordinate, accumulated in f64.
pub fn global_grad_norm<F: Scalar>(grads: &Parameters<F>) -> f64 {
    let mut sum_sq = 0.0f64;
    for tensor in grads.named_tensors() {
        for &g in tensor.data {
            let g = g.to_f64().expect("float converts");
            sum_sq += g * g;
        }
    }
    sum_sq.sqrt()
}

/// Scales gradients in place so their global norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<F: Scalar>(grads: &mut Parameters<F>, max_norm: f64) -> f64 {
    let norm = global_grad_norm(grads);
    if norm > max_norm {
        let scale = F::from_f64_lossy(max_norm / norm);
        for tensor in grads.named_tensors_mut() {
            for g in tensor.data.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 5,
            context_length: 4,
            embed_dim: 4,
            num_layers: 1,
            num_heads: 2,
            mlp_ratio: 2,
            seed: 9,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let config = tiny_config();
        let mut params = Parameters::<f64>::init(&config);
        let before = params.clone();
        let grads = Parameters::<f64>::zeros(&config);
        let mut state = AdamState::new(&config);
        adam_step(&mut params, &grads, &mut state, 1e-3);
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let config = tiny_config();
        let mut params = Parameters::<f64>::init(&config);
        let before = params.clone();
        let mut grads = Parameters::<f64>::zeros(&config);
        for t in grads.named_tensors_mut() {
            for (i, g) in t.data.iter_mut().enumerate() {
                *g = if i % 2 == 0 { 3.5 } else { -0.25 };
            }
        }
        let mut state = AdamState::new(&config);
        let lr = 1e-3;
        adam_step(&mut params, &grads, &mut state, lr);
        // With bias correction, step one is lr·g/(|g| + ε') ≈ lr·sign(g).
        let before_tensors = before.named_tensors();
        let grad_tensors = grads.named_tensors();
        for (i, t) in params.named_tensors().iter().enumerate() {
            for j in 0..t.data.len() {
                let moved = t.data[j] - before_tensors[i].data[j];
                let expected = -lr * grad_tensors[i].data[j].signum();
                assert!((moved - expected).abs() <= lr * 1e-4, "{} at {j}", t.name);
            }
        }
    }

    #[test]
    fn ten_step_quadratic_trajectory_matches_scalar_oracle() {
        // Minimize f(x) = x² from x = 1; gradient is 2x. The oracle is a
        // from-scratch scalar Adam sharing no code with the implementation.
        let lr = 0.1;
        let mut x = 1.0f64;
        let mut m = 0.0f64;
        let mut v = 0.0f64;
        let mut oracle_trajectory = Vec::new();
        for t in 1..=10 {
            let g = 2.0 * x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            x -= lr * m_hat / (v_hat.sqrt() + 1e-8);
            oracle_trajectory.push(x);
        }

        let mut params = [1.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        for t in 1..=10i32 {
            let grads = [2.0 * params[0]];
            adam_update_slice(
                &mut params,
                &grads,
                &mut m,
                &mut v,
                lr,
                0.9,
                0.999,
                1e-8,
                1.0 - 0.9f64.powi(t),
                1.0 - 0.999f64.powi(t),
            );
            let expected = oracle_trajectory[(t - 1) as usize];
            assert!(
                (params[0] - expected).abs() <= 1e-10,
                "step {t}: {} vs {expected}",
                params[0]
            );
        }
    }

    #[test]
    fn clipping_rescales_only_above_the_threshold() {
        let config = tiny_config();
        let mut grads = Parameters::<f64>::zeros(&config);
        grads.token_embedding[0] = 3.0;
        grads.token_embedding[1] = 4.0;
        let norm = clip_global_norm(&mut grads, 1.0);
        assert!((norm - 5.0).abs() <= 1e-12);
        assert!((global_grad_norm(&grads) - 1.0).abs() <= 1e-12);
        assert!((grads.token_embedding[0] - 0.6).abs() <= 1e-12);

        let mut small = Parameters::<f64>::zeros(&config);
        small.token_embedding[0] = 0.3;
        let norm = clip_global_norm(&mut small, 1.0);
        assert!((norm - 0.3).abs() <= 1e-12);
        assert_eq!(small.token_embedding[0], 0.3);
    }
}
