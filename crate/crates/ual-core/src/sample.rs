use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// One instruction-response pair, the unit of annotation and training.
///
/// `uncertainty` is the normalized judge score in [0, 1]; it is `None` until
/// the sample has been annotated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub instruction: String,
    pub response: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
}

impl Sample {
    pub fn new(id: impl Into<String>, instruction: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            instruction: instruction.into(),
            response: response.into(),
            uncertainty: None,
        }
    }

    pub fn with_uncertainty(mut self, u: f64) -> Self {
        self.uncertainty = Some(u);
        self
    }
}

/// Reads a JSON-lines dataset. Blank lines are skipped; a malformed line is an
/// error carrying its 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Sample>, CoreError> {
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line).map_err(|e| CoreError::DatasetFormat {
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<Sample>, CoreError> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

pub fn write_jsonl<W: Write>(mut writer: W, samples: &[Sample]) -> Result<(), CoreError> {
    for sample in samples {
        serde_json::to_writer(&mut writer, sample)
            .map_err(|e| CoreError::DatasetFormat { line: 0, message: e.to_string() })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
