use thiserror::Error;
use tinylm::TinyLmError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("token {0} never occurs in the corpus")]
    TokenNotFound(usize),

    #[error("only {found} tokens reach the occurrence threshold; a pair study needs at least 2")]
    NotEnoughEligibleTokens { found: usize },

    #[error("label class {label} has {size} members; silhouette needs at least 2 per class")]
    ClassTooSmall { label: bool, size: usize },

    #[error("data has rank 0 after centering; no principal directions exist")]
    DegenerateData,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Model(#[from] TinyLmError),
}
