//! Feature-space clustering study for a trained model: collect penultimate
//! features at chosen token positions, project them to 2D with principal
//! components, and score how well token identities separate using the
//! silhouette coefficient over randomly drawn token pairs.
//!
//! Silhouettes are always computed in the full feature space; the 2D
//! projection exists for plotting only. Every operation is deterministic
//! given the model, corpus, and seed.

pub mod error;
pub mod features;
pub mod pairs;
pub mod pca;
pub mod plot;
pub mod silhouette;

pub use error::AnalysisError;
pub use features::{count_byte_tokens, extract_features, FeatureRecord, FeatureSet};
pub use pairs::{pair_study, PairResult, PairStudyReport};
pub use pca::{pca_2d, Projection2D};
pub use plot::{projection_csv, projection_svg};
pub use silhouette::silhouette;
