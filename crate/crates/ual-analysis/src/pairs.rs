//! The random token-pair clustering study.
//!
//! Byte tokens that occur often enough form an eligible pool; distinct
//! unordered pairs are drawn from it with a seeded generator. For each pair
//! the model's features at the two tokens' positions are scored with the
//! silhouette (token identity as the label), and the report carries every
//! per-pair score plus their arithmetic mean. Same seed, same corpus, same
//! weights — same report, byte for byte.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tinylm::Parameters;

use crate::error::AnalysisError;
use crate::features::{count_byte_tokens, extract_features, FeatureSet};
use crate::silhouette::silhouette;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub token_a: usize,
    pub token_b: usize,
    /// Feature vectors actually used per token (occurrences, capped).
    pub count_a: usize,
    pub count_b: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStudyReport {
    pub seed: u64,
    pub n_pairs: usize,
    pub min_occurrences: usize,
    pub cap: usize,
    pub pairs: Vec<PairResult>,
    pub mean_silhouette: f64,
}

/// Runs the study over `corpus` (id, text) pairs with the given model.
///
/// Draws up to `n_pairs` distinct unordered pairs from the tokens with at
/// least `min_occurrences` appearances (clamped to the number of pairs that
/// exist), collecting at most `cap` feature vectors per token.
pub fn pair_study(
    params: &Parameters<f32>,
    corpus: &[(String, String)],
    n_pairs: usize,
    min_occurrences: usize,
    cap: usize,
    seed: u64,
    parallel: bool,
) -> Result<PairStudyReport, AnalysisError> {
    if min_occurrences < 2 {
        return Err(AnalysisError::InvalidInput(
            "min_occurrences must be at least 2 for a defined silhouette".into(),
        ));
    }
    if cap < 2 {
        return Err(AnalysisError::InvalidInput("cap must be at least 2".into()));
    }
    if n_pairs == 0 {
        return Err(AnalysisError::InvalidInput("n_pairs must be at least 1".into()));
    }

    let counts = count_byte_tokens(corpus);
    let mut eligible: Vec<usize> = counts
        .iter()
        .filter(|&(_, &c)| c >= min_occurrences)
        .map(|(&t, _)| t)
        .collect();
    eligible.sort_unstable();
    if eligible.len() < 2 {
        return Err(AnalysisError::NotEnoughEligibleTokens {
            found: eligible.len(),
        });
    }

    let mut all_pairs = Vec::with_capacity(eligible.len() * (eligible.len() - 1) / 2);
    for i in 0..eligible.len() {
        for j in (i + 1)..eligible.len() {
            all_pairs.push((eligible[i], eligible[j]));
        }
    }
    let take = n_pairs.min(all_pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, all_pairs.len(), take)
        .into_iter()
        .map(|i| all_pairs[i])
        .collect();

    let mut involved: Vec<usize> = chosen.iter().flat_map(|&(a, b)| [a, b]).collect();
    involved.sort_unstable();
    involved.dedup();
    let set = extract_features(params, corpus, &involved, cap, parallel)?;

    let mut pairs = Vec::with_capacity(take);
    for (a, b) in chosen {
        let rec_a = set.of_token(a);
        let rec_b = set.of_token(b);
        let mut rows: Vec<&crate::features::FeatureRecord> = rec_a.clone();
        rows.extend(rec_b.iter().copied());
        let matrix = FeatureSet::matrix(&rows);
        let labels: Vec<bool> = rows.iter().map(|r| r.token_id == b).collect();
        let score = silhouette(&matrix, set.dim, &labels)?;
        pairs.push(PairResult {
            token_a: a,
            token_b: b,
            count_a: rec_a.len(),
            count_b: rec_b.len(),
            score,
        });
    }
    let mean_silhouette = pairs.iter().map(|p| p.score).sum::<f64>() / pairs.len() as f64;
    Ok(PairStudyReport {
        seed,
        n_pairs: take,
        min_occurrences,
        cap,
        pairs,
        mean_silhouette,
    })
}
