//! Smoothing plans: the solved scale plus the per-sample smoothing values,
//! with a plain-text on-disk format that round-trips doubles losslessly.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::CoreError;
use crate::mapping::{compensated_sum, map_uncertainty, solve_beta};
use crate::sample::Sample;

const PLAN_MAGIC: &str = "ual-plan";
const PLAN_VERSION: u32 = 1;

/// The solved scale `beta` and the per-sample smoothing values whose mean
/// equals `alpha`, in dataset order. The bridge between annotation and
/// training: `entries[i]` carries the sample id so batches can join on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingPlan {
    pub alpha: f64,
    pub v_t: f64,
    pub beta: f64,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub sample_id: String,
    pub uncertainty: f64,
    pub value: f64,
}

impl SmoothingPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }

    pub fn mean_value(&self) -> f64 {
        compensated_sum(self.values()) / self.entries.len() as f64
    }

    /// Number of samples whose mapped value hit the cap.
    pub fn truncation_count(&self) -> usize {
        self.entries.iter().filter(|e| e.value >= self.v_t).count()
    }

    /// Checks the plan's own contract: every value in [0, v_t], each value
    /// equal to `min(beta * u, v_t)`, and the mean within 1e-9 of `alpha`.
    pub fn validate(&self) -> Result<(), CoreError> {
        for e in &self.entries {
            let expect = map_uncertainty(e.uncertainty, self.beta, self.v_t);
            if !(0.0..=self.v_t).contains(&e.value) || e.value != expect {
                return Err(CoreError::PlanFormat(format!(
                    "entry `{}` value {} does not match min(beta*u, v_t) = {}",
                    e.sample_id, e.value, expect
                )));
            }
        }
        let mean = self.mean_value();
        if (mean - self.alpha).abs() > 1e-9 {
            return Err(CoreError::PlanFormat(format!(
                "plan mean {mean} is not within 1e-9 of alpha {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CoreError> {
        writeln!(w, "{PLAN_MAGIC} {PLAN_VERSION}")?;
        writeln!(w, "alpha {}", self.alpha)?;
        writeln!(w, "v_t {}", self.v_t)?;
        writeln!(w, "beta {}", self.beta)?;
        writeln!(w, "count {}", self.entries.len())?;
        writeln!(w, "---")?;
        for e in &self.entries {
            if e.sample_id.contains('\t') || e.sample_id.contains('\n') {
                return Err(CoreError::PlanFormat(format!(
                    "sample id `{}` contains a tab or newline",
                    e.sample_id.escape_debug()
                )));
            }
            writeln!(w, "{}\t{}\t{}", e.sample_id, e.uncertainty, e.value)?;
        }
        Ok(())
    }

    pub fn write_to_file(&self, path: &Path) -> Result<(), CoreError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::atomic_write(path, &buf)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, CoreError> {
        let bad = |msg: &str| CoreError::PlanFormat(msg.to_string());
        let mut lines = r.lines();
        let mut next_line = || -> Result<String, CoreError> {
            lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(CoreError::Io)
        };

        let header = next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(PLAN_MAGIC) {
            return Err(bad("not a plan file (missing magic)"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing format version"))?;
        if version != PLAN_VERSION {
            return Err(CoreError::PlanFormat(format!(
                "unsupported plan version {version} (expected {PLAN_VERSION})"
            )));
        }

        let mut field = |name: &str| -> Result<f64, CoreError> {
            let line = next_line()?;
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| CoreError::PlanFormat(format!("malformed header line `{line}`")))?;
            if key != name {
                return Err(CoreError::PlanFormat(format!("expected field `{name}`, found `{key}`")));
            }
            value
                .parse()
                .map_err(|_| CoreError::PlanFormat(format!("field `{name}`: bad number `{value}`")))
        };
        let alpha = field("alpha")?;
        let v_t = field("v_t")?;
        let beta = field("beta")?;
        let count = field("count")? as usize;
        if next_line()? != "---" {
            return Err(bad("missing `---` separator"));
        }

        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let line = next_line()?;
            let mut cols = line.split('\t');
            let sample_id = cols.next().ok_or_else(|| bad("record missing sample id"))?.to_string();
            let uncertainty: f64 = cols
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CoreError::PlanFormat(format!("record `{sample_id}`: bad u")))?;
            let value: f64 = cols
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CoreError::PlanFormat(format!("record `{sample_id}`: bad v")))?;
            entries.push(PlanEntry { sample_id, uncertainty, value });
        }
        Ok(SmoothingPlan { alpha, v_t, beta, entries })
    }

    pub fn read_from_file(path: &Path) -> Result<Self, CoreError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Solves the mean constraint over an annotated dataset and maps every sample,
/// preserving dataset order. Every sample must carry an uncertainty score.
pub fn build_plan(dataset: &[Sample], alpha: f64, v_t: f64) -> Result<SmoothingPlan, CoreError> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut us = Vec::with_capacity(dataset.len());
    for sample in dataset {
        let u = sample
            .uncertainty
            .ok_or_else(|| CoreError::MissingUncertainty(sample.id.clone()))?;
        if !u.is_finite() || u < 0.0 {
            return Err(CoreError::InvalidUncertainty { id: sample.id.clone(), value: u });
        }
        us.push(u);
    }
    let beta = solve_beta(&us, alpha, v_t)?;
    let entries = dataset
        .iter()
        .zip(&us)
        .map(|(sample, &u)| PlanEntry {
            sample_id: sample.id.clone(),
            uncertainty: u,
            value: map_uncertainty(u, beta, v_t),
        })
        .collect();
    Ok(SmoothingPlan { alpha, v_t, beta, entries })
}
