//! Per-sample uncertainty scores for alignment training.
//!
//! Two sources are provided. The judge route sends each sample's
//! instruction and response to a chat-completions endpoint (or a
//! deterministic mock) with a versioned rating prompt, parses an integer
//! score out of the reply, and caches verdicts by content hash so
//! re-annotation costs zero calls. The perplexity route derives uncertainty
//! during training itself, from each sample's perplexity relative to a
//! running average.

mod cache;
mod error;
mod judge;
mod parse;
mod ppl;
mod template;

pub use cache::{content_hash, CacheEntry, VerdictCache};
pub use error::SourceError;
pub use judge::{
    annotate_dataset, AnnotateStats, Judge, JudgeConfig, JudgeVerdict, Provenance, API_KEY_ENV_VAR,
};
pub use parse::parse_score;
pub use ppl::{ppl_smoothing, PplState};
pub use template::{render_user_prompt, SYSTEM_PROMPT, TEMPLATE_ID};
