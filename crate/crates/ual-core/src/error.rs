use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("mean smoothing target {alpha} is outside the feasible range [0, {supremum}]")]
    InfeasibleConstraint { alpha: f64, supremum: f64 },

    #[error("sample `{0}` has no uncertainty score")]
    MissingUncertainty(String),

    #[error("sample `{id}` has invalid uncertainty {value} (must be finite and non-negative)")]
    InvalidUncertainty { id: String, value: f64 },

    #[error("invalid smoothing cap v_t={0} (must satisfy 0 < v_t < 1)")]
    InvalidCap(f64),

    #[error("plan file: {0}")]
    PlanFormat(String),

    #[error("dataset line {line}: {message}")]
    DatasetFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
