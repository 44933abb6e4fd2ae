//! `ual eval`: per-sample and mean perplexity of a checkpoint on a dataset.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use tinylm::load_checkpoint;

use crate::config::{self, FileConfig, Global, Log};
use crate::error::Failure;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `ual train`.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Evaluation dataset (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Fresh directory for ppl.json and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    /// Run the compute kernels single-threaded (bitwise-identical results).
    #[arg(long)]
    pub serial: bool,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    serial: bool,
    global: &'a Global,
    paths: Paths,
}

#[derive(Serialize)]
struct Paths {
    checkpoint: String,
    dataset: String,
    report: String,
}

#[derive(Serialize)]
struct PplReportFile {
    checkpoint_step: u64,
    mean: f64,
    per_sample: Vec<PplRow>,
}

#[derive(Serialize)]
struct PplRow {
    id: String,
    ppl: f64,
}

pub fn run(args: &EvalArgs, _file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    config::claim_run_dir(&args.run_dir)?;
    let report_path = args.run_dir.join("ppl.json");
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "eval",
            serial: args.serial,
            global,
            paths: Paths {
                checkpoint: args.checkpoint.display().to_string(),
                dataset: args.dataset.display().to_string(),
                report: report_path.display().to_string(),
            },
        },
    )?;

    let (params, step) = load_checkpoint(&args.checkpoint)?;
    let samples = ual_core::read_jsonl_file(&args.dataset)?;
    log.debug(format!("evaluating {} samples", samples.len()));
    let report = tinylm::evaluate_ppl(&params, &samples, !args.serial)?;

    let file = PplReportFile {
        checkpoint_step: step,
        mean: report.mean,
        per_sample: report
            .per_sample
            .into_iter()
            .map(|(id, ppl)| PplRow { id, ppl })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    ual_core::atomic_write(&report_path, &bytes)?;

    println!("mean ppl = {} over {} samples", file.mean, file.per_sample.len());
    Ok(())
}
