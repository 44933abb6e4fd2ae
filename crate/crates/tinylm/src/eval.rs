//! Held-out perplexity evaluation.
//!
//! Each sample is scored alone (batch of one) so padding never enters the
//! picture: the reported number is exp of the mean negative log-likelihood
//! over the sample's scored positions — response bytes and the final
//! end-of-text token, never the prompt.

use ual_core::Sample;

use crate::config::ModelConfig;
use crate::data::{encode_sample, make_batch};
use crate::error::TinyLmError;
use crate::model::{per_sample_nll, run_forward};
use crate::params::Parameters;

/// Per-sample perplexities plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct PplReport {
    pub per_sample: Vec<(String, f64)>,
    pub mean: f64,
}

/// Scores `corpus` under `params`, one sequence at a time.
pub fn evaluate_ppl(
    params: &Parameters<f32>,
    corpus: &[Sample],
    parallel: bool,
) -> Result<PplReport, TinyLmError> {
    if corpus.is_empty() {
        return Err(TinyLmError::EmptyCorpus);
    }
    let config: &ModelConfig = &params.config;
    let mut per_sample = Vec::with_capacity(corpus.len());
    for sample in corpus {
        let row = encode_sample(sample, config.context_length);
        let rows = [row];
        let ids = [sample.id.clone()];
        let batch = make_batch::<f32>(&rows, &ids, &[0.0], &[0]);
        let (logits, _cache) =
            run_forward(params, &batch.tokens, batch.batch, batch.seq, parallel)?;
        let nll = per_sample_nll(&logits, &batch)?;
        per_sample.push((sample.id.clone(), nll[0].exp()));
    }
    let mean = per_sample.iter().map(|(_, p)| p).sum::<f64>() / per_sample.len() as f64;
    Ok(PplReport { per_sample, mean })
}
