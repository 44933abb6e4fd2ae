//! `ual annotate`: scores every sample with the judge, writes the annotated
//! dataset plus a provenance sidecar, and prints a score histogram.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use uncertainty_sources::{annotate_dataset, Judge, JudgeConfig, Provenance, VerdictCache};

use crate::config::{self, FileConfig, Global, Log};
use crate::error::Failure;

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Input dataset (JSON lines, one sample per line).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Fresh directory for annotated.jsonl, provenance.json, and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    /// Judge endpoint: an http(s) chat-completions URL, `mock:fixed=<n>`,
    /// or `mock:table=<path>`.
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Model name sent to an HTTP judge (part of the cache key).
    #[arg(long)]
    pub judge_model: Option<String>,

    /// Verdict cache file, shared across runs when given; defaults to a
    /// private cache inside the run directory.
    #[arg(long)]
    pub cache: Option<PathBuf>,

    #[arg(long)]
    pub timeout_secs: Option<u64>,

    #[arg(long)]
    pub max_retries: Option<u32>,

    #[arg(long)]
    pub backoff_base_secs: Option<f64>,

    #[arg(long)]
    pub max_in_flight: Option<usize>,

    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    global: &'a Global,
    paths: Paths,
    judge: &'a JudgeConfig,
}

#[derive(Serialize)]
struct Paths {
    dataset: String,
    annotated: String,
    provenance: String,
    cache: String,
}

pub fn run(args: &AnnotateArgs, file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    let defaults = JudgeConfig::default();
    let judge_config = JudgeConfig {
        endpoint: config::pick(args.endpoint.clone(), file.judge.endpoint.clone(), String::new()),
        model: config::pick(args.judge_model.clone(), file.judge.model.clone(), String::new()),
        timeout_secs: config::pick(args.timeout_secs, file.judge.timeout_secs, defaults.timeout_secs),
        max_retries: config::pick(args.max_retries, file.judge.max_retries, defaults.max_retries),
        backoff_base_secs: config::pick(
            args.backoff_base_secs,
            file.judge.backoff_base_secs,
            defaults.backoff_base_secs,
        ),
        max_in_flight: config::pick(args.max_in_flight, file.judge.max_in_flight, defaults.max_in_flight),
        template_id: defaults.template_id.clone(),
        temperature: config::pick(args.temperature, file.judge.temperature, defaults.temperature),
    };
    if judge_config.endpoint.is_empty() {
        return Err(Failure::input(
            "no judge endpoint: pass --endpoint or set [judge].endpoint in the config file",
        ));
    }
    if !judge_config.endpoint.starts_with("mock:") && judge_config.model.is_empty() {
        return Err(Failure::input(
            "an HTTP judge needs a model name: pass --judge-model or set [judge].model",
        ));
    }

    let cache_path = args
        .cache
        .clone()
        .unwrap_or_else(|| args.run_dir.join("cache.jsonl"));
    let annotated_path = args.run_dir.join("annotated.jsonl");
    let provenance_path = args.run_dir.join("provenance.json");

    config::claim_run_dir(&args.run_dir)?;
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "annotate",
            global,
            paths: Paths {
                dataset: args.dataset.display().to_string(),
                annotated: annotated_path.display().to_string(),
                provenance: provenance_path.display().to_string(),
                cache: cache_path.display().to_string(),
            },
            judge: &judge_config,
        },
    )?;

    let samples = ual_core::read_jsonl_file(&args.dataset)?;
    log.info(format!(
        "annotating {} samples via {}",
        samples.len(),
        judge_config.endpoint
    ));

    let judge = Judge::new(judge_config.clone())?;
    let cache = VerdictCache::open(&cache_path)?;
    let (annotated, stats) = annotate_dataset(&samples, &judge, &cache)?;

    let mut bytes = Vec::new();
    ual_core::write_jsonl(&mut bytes, &annotated)?;
    ual_core::atomic_write(&annotated_path, &bytes)?;

    let provenance = Provenance::new(&judge_config, global.deterministic);
    let mut prov_bytes = serde_json::to_vec_pretty(&provenance)?;
    prov_bytes.push(b'\n');
    ual_core::atomic_write(&provenance_path, &prov_bytes)?;

    print_histogram(&annotated);
    println!(
        "{}/{} cache hits, {} judge calls",
        stats.cache_hits, stats.total, stats.backend_calls
    );
    Ok(())
}

/// Ten-bin histogram of the judge scores (uncertainty × 100). The last bin
/// is closed so a perfect 100 lands in it.
fn print_histogram(annotated: &[ual_core::Sample]) {
    let mut bins = [0usize; 10];
    for sample in annotated {
        let score = (sample.uncertainty.unwrap_or(0.0) * 100.0).round() as i64;
        let bin = (score.clamp(0, 100) as usize / 10).min(9);
        bins[bin] += 1;
    }
    println!("score histogram:");
    for (i, &count) in bins.iter().enumerate() {
        let lo = i * 10;
        let (hi, bracket) = if i == 9 { (100, ']') } else { ((i + 1) * 10, ')') };
        println!("  [{lo:3},{hi:3}{bracket} {count:5} {}", "#".repeat(count.min(60)));
    }
}
