use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    /// The judge endpoint could not produce a reply: retries were exhausted
    /// on transport errors / 5xx responses, or the server rejected the
    /// request outright. Carries what we last saw for forensics.
    #[error("judge unavailable after {attempts} attempt(s): {detail}")]
    JudgeUnavailable { attempts: u32, detail: String },

    /// The judge replied, but no score could be extracted from its text.
    #[error("no parseable score in judge reply: {raw:?}")]
    UnparseableScore { raw: String },

    /// A mock score table has no row for the requested sample.
    #[error("score table has no entry for sample {sample_id:?}")]
    ScoreTableMissing { sample_id: String },

    #[error("invalid judge config: {0}")]
    InvalidConfig(String),

    #[error("perplexity must be positive and finite, got {0}")]
    NonPositivePpl(f64),

    #[error("cache file line {line}: {message}")]
    CacheFormat { line: usize, message: String },

    #[error("score table line {line}: {message}")]
    TableFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
