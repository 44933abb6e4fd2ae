//! Synthetic two-regime corpus for end-to-end runs.
//!
//! Low-entropy samples are short addition drills whose responses are fully
//! determined by the instruction; high-entropy samples are seeded random
//! letter strings with no structure to learn. Each sample also gets a mock
//! judge score: drills score low (at most 20), random prose scores high
//! (at least 70), so the two regimes are cleanly separated on the score
//! axis before any model enters the picture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ual_core::Sample;

/// Score bounds per regime, inclusive.
pub const LOW_SCORE_RANGE: (u8, u8) = (5, 20);
pub const HIGH_SCORE_RANGE: (u8, u8) = (70, 95);

/// What to generate. Counts may be zero, but not both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub low: usize,
    pub high: usize,
    pub seed: u64,
}

/// One row of the mock judge's score table, JSON-lines serializable in the
/// exact shape the `mock:table=<path>` backend reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: String,
    pub score: u8,
}

/// Generates the corpus and its score table. Pure function of the spec:
/// the same spec always produces byte-identical output.
pub fn generate(spec: &CorpusSpec) -> (Vec<Sample>, Vec<ScoreRow>) {
    let mut samples = Vec::with_capacity(spec.low + spec.high);
    let mut scores = Vec::with_capacity(spec.low + spec.high);

    // Separate streams so changing one regime's count never shifts the
    // other regime's content.
    let mut low_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    low_rng.set_stream(1);
    for index in 0..spec.low {
        let a: u32 = low_rng.gen_range(0..50);
        let b: u32 = low_rng.gen_range(0..50);
        let id = format!("low-{index:04}");
        samples.push(Sample::new(&id, format!("{a}+{b}="), format!("{}", a + b)));
        scores.push(ScoreRow {
            sample_id: id,
            score: low_rng.gen_range(LOW_SCORE_RANGE.0..=LOW_SCORE_RANGE.1),
        });
    }

    let mut high_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    high_rng.set_stream(2);
    for index in 0..spec.high {
        let words = high_rng.gen_range(4..=7);
        let mut text = String::new();
        for w in 0..words {
            if w > 0 {
                text.push(' ');
            }
            let len = high_rng.gen_range(2..=7);
            for _ in 0..len {
                text.push(high_rng.gen_range(b'a'..=b'z') as char);
            }
        }
        text.push('.');
        let id = format!("high-{index:04}");
        samples.push(Sample::new(&id, "say:", text));
        scores.push(ScoreRow {
            sample_id: id,
            score: high_rng.gen_range(HIGH_SCORE_RANGE.0..=HIGH_SCORE_RANGE.1),
        });
    }

    (samples, scores)
}
