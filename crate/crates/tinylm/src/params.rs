//! Model parameters as named, row-major tensors.
//!
//! The named listing (`named_tensors` / `named_tensors_mut`) fixes one
//! canonical tensor order used everywhere: initialization draws, checkpoint
//! layout, optimizer state pairing, and gradient traversal. Keeping a single
//! order is what makes training byte-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ual_loss::Scalar;

use crate::config::ModelConfig;

/// Standard deviation for every randomly initialized weight.
const INIT_STD: f64 = 0.02;

/// One transformer block's tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTensors<F> {
    pub w_query: Vec<F>,
    pub w_key: Vec<F>,
    pub w_value: Vec<F>,
    pub w_attn_out: Vec<F>,
    pub ln1_gain: Vec<F>,
    pub ln1_bias: Vec<F>,
    pub ln2_gain: Vec<F>,
    pub ln2_bias: Vec<F>,
    pub w_mlp_in: Vec<F>,
    pub b_mlp_in: Vec<F>,
    pub w_mlp_out: Vec<F>,
    pub b_mlp_out: Vec<F>,
}

/// All learnable tensors plus the config their shapes derive from. Also the
/// container for gradients and optimizer moments, which share every shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<F> {
    pub config: ModelConfig,
    /// vocab_size × embed_dim
    pub token_embedding: Vec<F>,
    /// context_length × embed_dim, learned absolute positions
    pub positional_embedding: Vec<F>,
    pub layers: Vec<LayerTensors<F>>,
    pub final_ln_gain: Vec<F>,
    pub final_ln_bias: Vec<F>,
    /// embed_dim × vocab_size, untied from the token embedding
    pub w_output: Vec<F>,
}

/// A borrowed view of one named tensor.
pub struct TensorRef<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [F],
}

/// A mutable view of one named tensor.
pub struct TensorMut<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut Vec<F>,
}

impl<F: Scalar> Parameters<F> {
    /// All tensors zeroed — the starting point for gradients and moments.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.embed_dim;
        let m = config.mlp_dim();
        let layer = || LayerTensors {
            w_query: vec![F::zero(); d * d],
            w_key: vec![F::zero(); d * d],
            w_value: vec![F::zero(); d * d],
            w_attn_out: vec![F::zero(); d * d],
            ln1_gain: vec![F::zero(); d],
            ln1_bias: vec![F::zero(); d],
            ln2_gain: vec![F::zero(); d],
            ln2_bias: vec![F::zero(); d],
            w_mlp_in: vec![F::zero(); d * m],
            b_mlp_in: vec![F::zero(); m],
            w_mlp_out: vec![F::zero(); m * d],
            b_mlp_out: vec![F::zero(); d],
        };
        Self {
            config: config.clone(),
            token_embedding: vec![F::zero(); config.vocab_size * d],
            positional_embedding: vec![F::zero(); config.context_length * d],
            layers: (0..config.num_layers).map(|_| layer()).collect(),
            final_ln_gain: vec![F::zero(); d],
            final_ln_bias: vec![F::zero(); d],
            w_output: vec![F::zero(); d * config.vocab_size],
        }
    }

    /// Seeded random initialization: weights and embeddings N(0, 0.02²),
    /// layer-norm gains 1, every bias 0. Draws happen in canonical tensor
    /// order from a counter-based generator, so the same seed always builds
    /// the same model.
    pub fn init(config: &ModelConfig) -> Self {
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for tensor in params.named_tensors_mut() {
            let leaf = tensor.name.rsplit('.').next().expect("non-empty name");
            if leaf.ends_with("gain") {
                tensor.data.fill(F::one());
            } else if leaf.ends_with("bias") || leaf.starts_with("b_") {
                // Already zero.
            } else {
                for value in tensor.data.iter_mut() {
                    *value = F::from_f64_lossy(normal.sample(&mut rng));
                }
            }
        }
        params
    }

    /// Canonical named listing. Order is part of the on-disk format.
    pub fn named_tensors(&self) -> Vec<TensorRef<'_, F>> {
        let d = self.config.embed_dim;
        let m = self.config.mlp_dim();
        let v = self.config.vocab_size;
        let t = self.config.context_length;
        let mut tensors = vec![
            TensorRef {
                name: "token_embedding".into(),
                shape: vec![v, d],
                data: &self.token_embedding,
            },
            TensorRef {
                name: "positional_embedding".into(),
                shape: vec![t, d],
                data: &self.positional_embedding,
            },
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            let entries: [(&str, Vec<usize>, &[F]); 12] = [
                ("w_query", vec![d, d], &layer.w_query),
                ("w_key", vec![d, d], &layer.w_key),
                ("w_value", vec![d, d], &layer.w_value),
                ("w_attn_out", vec![d, d], &layer.w_attn_out),
                ("ln1_gain", vec![d], &layer.ln1_gain),
                ("ln1_bias", vec![d], &layer.ln1_bias),
                ("ln2_gain", vec![d], &layer.ln2_gain),
                ("ln2_bias", vec![d], &layer.ln2_bias),
                ("w_mlp_in", vec![d, m], &layer.w_mlp_in),
                ("b_mlp_in", vec![m], &layer.b_mlp_in),
                ("w_mlp_out", vec![m, d], &layer.w_mlp_out),
                ("b_mlp_out", vec![d], &layer.b_mlp_out),
            ];
            for (suffix, shape, data) in entries {
                tensors.push(TensorRef {
                    name: format!("layer{i}.{suffix}"),
                    shape,
                    data,
                });
            }
        }
        tensors.push(TensorRef {
            name: "final_ln_gain".into(),
            shape: vec![d],
            data: &self.final_ln_gain,
        });
        tensors.push(TensorRef {
            name: "final_ln_bias".into(),
            shape: vec![d],
            data: &self.final_ln_bias,
        });
        tensors.push(TensorRef {
            name: "w_output".into(),
            shape: vec![d, v],
            data: &self.w_output,
        });
        tensors
    }

    /// Mutable counterpart of `named_tensors`, same order.
    pub fn named_tensors_mut(&mut self) -> Vec<TensorMut<'_, F>> {
        let d = self.config.embed_dim;
        let m = self.config.mlp_dim();
        let v = self.config.vocab_size;
        let t = self.config.context_length;
        let mut tensors = vec![
            TensorMut {
                name: "token_embedding".into(),
                shape: vec![v, d],
                data: &mut self.token_embedding,
            },
            TensorMut {
                name: "positional_embedding".into(),
                shape: vec![t, d],
                data: &mut self.positional_embedding,
            },
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let entries: [(&str, Vec<usize>, &mut Vec<F>); 12] = [
                ("w_query", vec![d, d], &mut layer.w_query),
                ("w_key", vec![d, d], &mut layer.w_key),
                ("w_value", vec![d, d], &mut layer.w_value),
                ("w_attn_out", vec![d, d], &mut layer.w_attn_out),
                ("ln1_gain", vec![d], &mut layer.ln1_gain),
                ("ln1_bias", vec![d], &mut layer.ln1_bias),
                ("ln2_gain", vec![d], &mut layer.ln2_gain),
                ("ln2_bias", vec![d], &mut layer.ln2_bias),
                ("w_mlp_in", vec![d, m], &mut layer.w_mlp_in),
                ("b_mlp_in", vec![m], &mut layer.b_mlp_in),
                ("w_mlp_out", vec![m, d], &mut layer.w_mlp_out),
                ("b_mlp_out", vec![d], &mut layer.b_mlp_out),
            ];
            for (suffix, shape, data) in entries {
                tensors.push(TensorMut {
                    name: format!("layer{i}.{suffix}"),
                    shape,
                    data,
                });
            }
        }
        tensors.push(TensorMut {
            name: "final_ln_gain".into(),
            shape: vec![d],
            data: &mut self.final_ln_gain,
        });
        tensors.push(TensorMut {
            name: "final_ln_bias".into(),
            shape: vec![d],
            data: &mut self.final_ln_bias,
        });
        tensors.push(TensorMut {
            name: "w_output".into(),
            shape: vec![d, v],
            data: &mut self.w_output,
        });
        tensors
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Element-wise conversion to another float width, e.g. f32 model to f64
    /// for finite-difference work.
    pub fn cast<G: Scalar>(&self) -> Parameters<G> {
        let mut out = Parameters::<G>::zeros(&self.config);
        for (src, dst) in self.named_tensors().iter().zip(out.named_tensors_mut()) {
            debug_assert_eq!(src.name, dst.name);
            for (s, d) in src.data.iter().zip(dst.data.iter_mut()) {
                *d = G::from_f64_lossy(s.to_f64().expect("float converts"));
            }
        }
        out
    }

    /// Name of the first tensor holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_tensors()
            .iter()
            .find(|t| t.data.iter().any(|x| !x.is_finite()))
            .map(|t| t.name.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 11,
            context_length: 8,
            embed_dim: 6,
            num_layers: 2,
            num_heads: 2,
            mlp_ratio: 4,
            seed: 3,
        }
    }

    #[test]
    fn tensor_count_and_sizes_follow_config() {
        let params = Parameters::<f32>::zeros(&tiny_config());
        let tensors = params.named_tensors();
        assert_eq!(tensors.len(), 2 + 2 * 12 + 3);
        for t in &tensors {
            assert_eq!(t.shape.iter().product::<usize>(), t.data.len(), "{}", t.name);
        }
        let expected = 11 * 6 + 8 * 6 + 2 * (4 * 36 + 4 * 6 + 6 * 24 + 24 + 24 * 6 + 6) + 6 + 6 + 6 * 11;
        assert_eq!(params.num_params(), expected);
    }

    #[test]
    fn init_is_deterministic_and_structured() {
        let a = Parameters::<f32>::init(&tiny_config());
        let b = Parameters::<f32>::init(&tiny_config());
        assert_eq!(a, b);
        assert!(a.layers[0].ln1_gain.iter().all(|&g| g == 1.0));
        assert!(a.layers[1].b_mlp_in.iter().all(|&b| b == 0.0));
        assert!(a.token_embedding.iter().any(|&w| w != 0.0));
        assert!(a.first_non_finite().is_none());

        let different_seed = Parameters::<f32>::init(&ModelConfig {
            seed: 4,
            ..tiny_config()
        });
        assert_ne!(a.token_embedding, different_seed.token_embedding);
    }

    #[test]
    fn mutable_and_shared_listings_agree() {
        let mut params = Parameters::<f32>::init(&tiny_config());
        let names: Vec<String> = params.named_tensors().iter().map(|t| t.name.clone()).collect();
        let names_mut: Vec<String> = params.named_tensors_mut().iter().map(|t| t.name.clone()).collect();
        assert_eq!(names, names_mut);
    }

    #[test]
    fn cast_round_trips_exactly_from_f32() {
        let params = Parameters::<f32>::init(&tiny_config());
        let back: Parameters<f32> = params.cast::<f64>().cast::<f32>();
        assert_eq!(params, back);
    }
}
