use serde::{Deserialize, Serialize};

use crate::error::TinyLmError;
use crate::tokenizer;

/// Architecture hyperparameters. Every tensor shape in the model is a pure
/// function of this struct, which is why it travels inside checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub context_length: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub mlp_ratio: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Desk-scale defaults: trains in minutes on a single core.
    fn default() -> Self {
        Self {
            vocab_size: tokenizer::VOCAB_SIZE,
            context_length: 256,
            embed_dim: 128,
            num_layers: 4,
            num_heads: 4,
            mlp_ratio: 4,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), TinyLmError> {
        if self.vocab_size < 2 {
            return Err(TinyLmError::InvalidConfig(format!(
                "vocab_size must be at least 2, got {}",
                self.vocab_size
            )));
        }
        if self.context_length < 2 {
            return Err(TinyLmError::InvalidConfig(format!(
                "context_length must be at least 2, got {}",
                self.context_length
            )));
        }
        if self.embed_dim == 0 || self.num_layers == 0 || self.num_heads == 0 || self.mlp_ratio == 0
        {
            return Err(TinyLmError::InvalidConfig(
                "embed_dim, num_layers, num_heads, and mlp_ratio must be positive".into(),
            ));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(TinyLmError::InvalidConfig(format!(
                "embed_dim {} must be divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    /// Width of the MLP hidden layer.
    pub fn mlp_dim(&self) -> usize {
        self.embed_dim * self.mlp_ratio
    }

    /// Width of one attention head.
    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_indivisible_heads() {
        let config = ModelConfig {
            embed_dim: 10,
            num_heads: 3,
            ..ModelConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_degenerate_sizes() {
        for (v, t) in [(1, 8), (8, 1)] {
            let config = ModelConfig {
                vocab_size: v,
                context_length: t,
                ..ModelConfig::default()
            };
            assert!(config.validate().is_err());
        }
    }
}
