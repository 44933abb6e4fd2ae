//! Collecting per-token hidden features from a trained model.
//!
//! For every corpus position whose *input* token is one of the requested
//! ids, the vector recorded is the model's penultimate feature at that
//! position — the final layer-norm output that feeds the classifier head.
//! Texts longer than the context window are split into consecutive windows
//! and scored window by window.

use std::collections::HashMap;

use tinylm::{forward, tokenizer, Parameters};

use crate::error::AnalysisError;

/// One collected occurrence of a token of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub token_id: usize,
    /// 0-based occurrence index of this token across the corpus scan.
    pub occurrence: usize,
    pub text_id: String,
    pub vector: Vec<f32>,
}

/// All collected records, with their shared dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub records: Vec<FeatureRecord>,
}

impl FeatureSet {
    /// Records for one token id, in collection order.
    pub fn of_token(&self, token_id: usize) -> Vec<&FeatureRecord> {
        self.records
            .iter()
            .filter(|r| r.token_id == token_id)
            .collect()
    }

    /// Flattens the given records into a row-major n×dim matrix in f64.
    pub fn matrix(records: &[&FeatureRecord]) -> Vec<f64> {
        records
            .iter()
            .flat_map(|r| r.vector.iter().map(|&x| x as f64))
            .collect()
    }
}

/// Scans `corpus` (id, text) pairs in order and collects up to `cap`
/// feature vectors per requested token.
pub fn extract_features(
    params: &Parameters<f32>,
    corpus: &[(String, String)],
    tokens_of_interest: &[usize],
    cap: usize,
    parallel: bool,
) -> Result<FeatureSet, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::InvalidInput("corpus is empty".into()));
    }
    if tokens_of_interest.is_empty() {
        return Err(AnalysisError::InvalidInput(
            "no tokens of interest given".into(),
        ));
    }
    if cap == 0 {
        return Err(AnalysisError::InvalidInput("cap must be at least 1".into()));
    }
    let vocab = params.config.vocab_size;
    for &t in tokens_of_interest {
        if t >= vocab {
            return Err(AnalysisError::InvalidInput(format!(
                "token {t} is outside the vocabulary (size {vocab})"
            )));
        }
    }

    let d = params.config.embed_dim;
    let window = params.config.context_length;
    let mut counts: HashMap<usize, usize> = tokens_of_interest.iter().map(|&t| (t, 0)).collect();
    let mut records = Vec::new();

    for (text_id, text) in corpus {
        let ids = tokenizer::tokenize(text);
        for chunk in ids.chunks(window) {
            let out = forward(params, chunk, 1, chunk.len(), true, parallel)?;
            let features = out.features.expect("features requested");
            for (pos, &token) in chunk.iter().enumerate() {
                let Some(seen) = counts.get_mut(&token) else {
                    continue;
                };
                if *seen >= cap {
                    continue;
                }
                records.push(FeatureRecord {
                    token_id: token,
                    occurrence: *seen,
                    text_id: text_id.clone(),
                    vector: features[pos * d..(pos + 1) * d].to_vec(),
                });
                *seen += 1;
            }
        }
    }

    for &t in tokens_of_interest {
        if counts[&t] == 0 {
            return Err(AnalysisError::TokenNotFound(t));
        }
    }
    Ok(FeatureSet { dim: d, records })
}

/// Counts how often each byte token occurs as an input position across the
/// corpus, using the same tokenization and windowing as extraction.
/// Structural markers (begin/end/pad) are not text and are left out.
pub fn count_byte_tokens(corpus: &[(String, String)]) -> HashMap<usize, usize> {
    let mut counts = HashMap::new();
    for (_, text) in corpus {
        for &id in &tokenizer::tokenize(text) {
            if id < 256 {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
    }
    counts
}
