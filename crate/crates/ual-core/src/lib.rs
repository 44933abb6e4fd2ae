//! Core of the uncertainty-aware smoothing toolkit: the truncated linear
//! mapping from per-sample uncertainty to label-smoothing values, the exact
//! solver for the mean-constrained scale, and the on-disk smoothing plan.
//!
//! Everything here is a pure function over immutable inputs and safe to call
//! from any number of threads.

mod error;
mod mapping;
mod plan;
mod sample;

pub use error::CoreError;
pub use mapping::{map_uncertainty, mapped_mean, mean_supremum, solve_beta};
pub use plan::{build_plan, PlanEntry, SmoothingPlan};
pub use sample::{read_jsonl, read_jsonl_file, write_jsonl, Sample};

use std::io::Write;
use std::path::Path;

/// Writes `bytes` to `path` atomically: a temp file in the same directory,
/// fsync, then rename. Readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp_path = dir.join(format!(".{stem}.tmp.{}", std::process::id()));
    let mut tmp = std::fs::File::create(&tmp_path)?;
    tmp.write_all(bytes)?;
    tmp.sync_all()?;
    drop(tmp);
    match std::fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}
