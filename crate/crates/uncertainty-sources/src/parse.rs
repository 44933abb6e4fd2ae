//! Extraction of the integer score from judge reply text.

use regex::Regex;
use std::sync::OnceLock;

use crate::error::SourceError;

fn score_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?i)score\s*:\s*(\d+)").expect("pattern compiles"))
}

/// Finds the first `SCORE: <n>` marker (case-insensitive, whitespace-tolerant
/// around the colon) whose integer lies in 0..=100 and returns that integer.
/// Markers with out-of-range numbers are skipped; if no marker qualifies the
/// text is unparseable.
pub fn parse_score(model_text: &str) -> Result<u8, SourceError> {
    for capture in score_pattern().captures_iter(model_text) {
        if let Ok(score) = capture[1].parse::<u8>() {
            if score <= 100 {
                return Ok(score);
            }
        }
    }
    Err(SourceError::UnparseableScore {
        raw: model_text.to_owned(),
    })
}
