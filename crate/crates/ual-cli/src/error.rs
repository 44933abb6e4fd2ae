//! One failure type for the whole binary, carrying the process exit code.
//!
//! The map is fixed so pipelines can branch on it:
//!   0 success
//!   2 input error (bad files, bad flags, bad data)
//!   3 external service error (the judge could not be reached or understood)
//!   4 constraint infeasibility (the requested mean smoothing is unreachable)
//!   5 internal invariant violation (a bug, not a usage problem)

use tinylm::TinyLmError;
use ual_analysis::AnalysisError;
use ual_core::CoreError;
use uncertainty_sources::SourceError;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SERVICE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

/// An error message plus the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INTERNAL, message: message.into() }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InfeasibleConstraint { .. } => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<SourceError> for Failure {
    fn from(e: SourceError) -> Self {
        let code = match &e {
            // The judge itself misbehaved: unreachable, or replied with
            // something we could not score.
            SourceError::JudgeUnavailable { .. } | SourceError::UnparseableScore { .. } => {
                EXIT_SERVICE
            }
            // Everything else is a problem with our inputs or configuration.
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<TinyLmError> for Failure {
    fn from(e: TinyLmError) -> Self {
        let code = match &e {
            // Shapes are derived from the config, so a mismatch is a bug;
            // divergence means the run must not be trusted.
            TinyLmError::ShapeMismatch(_) | TinyLmError::TrainingDiverged { .. } => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Model(inner) => Failure::from(inner),
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<toml::de::Error> for Failure {
    fn from(e: toml::de::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<toml::ser::Error> for Failure {
    fn from(e: toml::ser::Error) -> Self {
        // Serializing our own resolved config should never fail.
        Failure::internal(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_constraint_maps_to_exit_4() {
        let f = Failure::from(CoreError::InfeasibleConstraint { alpha: 0.5, supremum: 0.2 });
        assert_eq!(f.code, EXIT_INFEASIBLE);
        assert!(f.message.contains("0.2"), "supremum must appear: {}", f.message);
    }

    #[test]
    fn judge_unavailable_maps_to_exit_3() {
        let f = Failure::from(SourceError::JudgeUnavailable { attempts: 3, detail: "x".into() });
        assert_eq!(f.code, EXIT_SERVICE);
    }

    #[test]
    fn parse_and_io_problems_map_to_exit_2() {
        let parse = Failure::from(CoreError::DatasetFormat { line: 7, message: "bad".into() });
        assert_eq!(parse.code, EXIT_INPUT);
        assert!(parse.message.contains("line 7"));
        let io = Failure::from(std::io::Error::new(std::io::ErrorKind::NotFound, "gone"));
        assert_eq!(io.code, EXIT_INPUT);
    }

    #[test]
    fn divergence_maps_to_exit_5() {
        let f = Failure::from(TinyLmError::TrainingDiverged { step: 3, detail: "nan".into() });
        assert_eq!(f.code, EXIT_INTERNAL);
    }
}
