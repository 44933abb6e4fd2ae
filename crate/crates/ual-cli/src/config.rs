//! Layered run configuration: built-in defaults, then a TOML config file,
//! then command-line flags, with later layers winning. Every subcommand
//! resolves one concrete view of its settings and writes it into the run
//! directory as `config.toml` before doing any work, so a finished run
//! directory always says exactly how it was produced.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::Failure;

/// How chatty the run is on standard error. Primary outputs (files, the
/// histogram, summary lines) are unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

/// Stderr logger gated by the resolved level.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub level: LogLevel,
}

impl Log {
    pub fn info(&self, message: impl AsRef<str>) {
        if self.level >= LogLevel::Info {
            eprintln!("{}", message.as_ref());
        }
    }

    pub fn debug(&self, message: impl AsRef<str>) {
        if self.level >= LogLevel::Debug {
            eprintln!("{}", message.as_ref());
        }
    }
}

/// Settings shared by every subcommand, already resolved.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Global {
    pub seed: u64,
    /// Pins wall-clock fields (metrics timing, provenance timestamps) to
    /// zero so identical runs are byte-identical.
    pub deterministic: bool,
    pub log_level: LogLevel,
}

/// The optional config file. Every field may be omitted; missing values
/// fall back to the built-in defaults unless a flag supplies them.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub global: GlobalFile,
    #[serde(default)]
    pub judge: JudgeFile,
    #[serde(default)]
    pub model: ModelFile,
    #[serde(default)]
    pub train: TrainFile,
    #[serde(default)]
    pub analyze: AnalyzeFile,
    #[serde(default)]
    pub corpus: CorpusFile,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalFile {
    pub seed: Option<u64>,
    pub deterministic: Option<bool>,
    pub log_level: Option<LogLevel>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeFile {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_base_secs: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub context_length: Option<usize>,
    pub embed_dim: Option<usize>,
    pub num_layers: Option<usize>,
    pub num_heads: Option<usize>,
    pub mlp_ratio: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub learning_rate: Option<f64>,
    pub warmup_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub max_steps: Option<usize>,
    pub clip_norm: Option<f64>,
    pub serial: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeFile {
    pub n_pairs: Option<usize>,
    pub min_occurrences: Option<usize>,
    pub cap: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFile {
    pub low: Option<usize>,
    pub high: Option<usize>,
}

impl FileConfig {
    /// Loads the file if a path was given; no file means all defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("config file {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::input(format!("config file {}: {e}", path.display())))
    }
}

/// Flag beats file beats default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like `pick` without a default, for genuinely optional settings.
pub fn pick_opt<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Claims a fresh run directory: creates it, or accepts an existing empty
/// directory. Anything else is refused so no previous run is overwritten.
pub fn claim_run_dir(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        if !path.is_dir() {
            return Err(Failure::input(format!(
                "run directory {} exists and is not a directory",
                path.display()
            )));
        }
        if fs::read_dir(path)?.next().is_some() {
            return Err(Failure::input(format!(
                "run directory {} is not empty; refusing to overwrite a previous run",
                path.display()
            )));
        }
        return Ok(());
    }
    fs::create_dir_all(path)?;
    Ok(())
}

/// Serializes the resolved view and writes it as `config.toml` in the run
/// directory. Called before a subcommand does any real work.
pub fn write_snapshot<T: Serialize>(run_dir: &Path, resolved: &T) -> Result<(), Failure> {
    let text = toml::to_string_pretty(resolved)?;
    ual_core::atomic_write(&run_dir.join("config.toml"), text.as_bytes())?;
    Ok(())
}
