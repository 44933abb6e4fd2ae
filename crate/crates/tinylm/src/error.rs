use thiserror::Error;
use ual_loss::LossError;

#[derive(Debug, Error)]
pub enum TinyLmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("invalid training hyperparameters: {0}")]
    InvalidHyper(String),

    #[error("smoothing plan does not cover the dataset: {0}")]
    PlanDatasetMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("evaluation corpus is empty")]
    EmptyCorpus,

    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),

    #[error("checkpoint version {found} is not the supported version {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("tensor {0} contains a non-finite value")]
    NonFiniteTensor(String),

    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: u64, detail: String },

    #[error(transparent)]
    Loss(#[from] LossError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
