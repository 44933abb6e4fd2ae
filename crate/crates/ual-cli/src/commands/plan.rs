//! `ual plan`: solves the per-sample smoothing values for an annotated
//! dataset and writes the plan file.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use crate::config::{self, FileConfig, Global, Log};
use crate::error::Failure;

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Annotated dataset (every sample must carry an uncertainty).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Fresh directory for plan.txt and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    /// Target mean smoothing value across the dataset.
    #[arg(long)]
    pub alpha: f64,

    /// Per-sample smoothing cap.
    #[arg(long, default_value_t = 0.99)]
    pub v_t: f64,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    alpha: f64,
    v_t: f64,
    global: &'a Global,
    paths: Paths,
}

#[derive(Serialize)]
struct Paths {
    dataset: String,
    plan: String,
}

pub fn run(args: &PlanArgs, _file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    config::claim_run_dir(&args.run_dir)?;
    let plan_path = args.run_dir.join("plan.txt");
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "plan",
            alpha: args.alpha,
            v_t: args.v_t,
            global,
            paths: Paths {
                dataset: args.dataset.display().to_string(),
                plan: plan_path.display().to_string(),
            },
        },
    )?;

    let samples = ual_core::read_jsonl_file(&args.dataset)?;
    log.debug(format!("solving for {} samples", samples.len()));
    let plan = ual_core::build_plan(&samples, args.alpha, args.v_t)?;

    let mut bytes = Vec::new();
    plan.write_to(&mut bytes)?;
    ual_core::atomic_write(&plan_path, &bytes)?;

    println!("beta = {}", plan.beta);
    println!("achieved mean = {}", plan.mean_value());
    println!("truncated = {} of {}", plan.truncation_count(), plan.len());
    Ok(())
}
