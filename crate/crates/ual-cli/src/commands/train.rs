//! `ual train`: trains the byte-level model on a dataset and writes the
//! metrics log and final checkpoint into the run directory.

use std::fs::File;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use tinylm::{save_checkpoint, ModelConfig, TrainHyper, TrainMode};
use ual_core::SmoothingPlan;

use crate::config::{self, FileConfig, Global, Log};
use crate::error::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Plain cross-entropy.
    Sft,
    /// Fixed label smoothing; needs --alpha.
    Ls,
    /// Per-sample smoothing from a plan file; needs --plan.
    Ual,
    /// Per-sample smoothing from online perplexity; needs --alpha.
    UalPpl,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Fresh directory for metrics.jsonl, checkpoint.bin, and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    #[arg(long, value_enum)]
    pub mode: ModeArg,

    /// Smoothing value for `ls`, or target mean for `ual-ppl`.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Smoothing cap for `ual-ppl`.
    #[arg(long, default_value_t = 0.99)]
    pub v_t: f64,

    /// Plan file for `ual`.
    #[arg(long)]
    pub plan: Option<PathBuf>,

    // Model shape overrides.
    #[arg(long)]
    pub context_length: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub num_heads: Option<usize>,
    #[arg(long)]
    pub mlp_ratio: Option<usize>,

    // Optimization overrides.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,

    /// Run the compute kernels single-threaded (bitwise-identical results).
    #[arg(long)]
    pub serial: bool,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    global: &'a Global,
    mode: ModeSnapshot,
    paths: Paths,
    model: &'a ModelConfig,
    train: &'a TrainHyper,
}

#[derive(Serialize)]
struct ModeSnapshot {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<String>,
}

#[derive(Serialize)]
struct Paths {
    dataset: String,
    metrics: String,
    checkpoint: String,
}

/// Builds the training mode from the flags, rejecting leftovers so a typo
/// like `--mode sft --alpha 0.1` fails loudly instead of being ignored.
fn resolve_mode(args: &TrainArgs) -> Result<(TrainMode, ModeSnapshot), Failure> {
    let need_alpha = || {
        args.alpha
            .ok_or_else(|| Failure::input(format!("--mode {:?} needs --alpha", args.mode)))
    };
    match args.mode {
        ModeArg::Sft => {
            if args.alpha.is_some() || args.plan.is_some() {
                return Err(Failure::input("--mode sft takes neither --alpha nor --plan"));
            }
            Ok((
                TrainMode::Sft,
                ModeSnapshot { name: "sft".into(), alpha: None, v_t: None, plan: None },
            ))
        }
        ModeArg::Ls => {
            if args.plan.is_some() {
                return Err(Failure::input("--mode ls takes no --plan"));
            }
            let alpha = need_alpha()?;
            Ok((
                TrainMode::LabelSmoothing { alpha },
                ModeSnapshot { name: "ls".into(), alpha: Some(alpha), v_t: None, plan: None },
            ))
        }
        ModeArg::Ual => {
            if args.alpha.is_some() {
                return Err(Failure::input(
                    "--mode ual takes no --alpha; the plan file already fixes the values",
                ));
            }
            let path = args
                .plan
                .as_ref()
                .ok_or_else(|| Failure::input("--mode ual needs --plan"))?;
            let plan = SmoothingPlan::read_from_file(path)?;
            Ok((
                TrainMode::Ual { plan },
                ModeSnapshot {
                    name: "ual".into(),
                    alpha: None,
                    v_t: None,
                    plan: Some(path.display().to_string()),
                },
            ))
        }
        ModeArg::UalPpl => {
            if args.plan.is_some() {
                return Err(Failure::input("--mode ual-ppl takes no --plan"));
            }
            let alpha = need_alpha()?;
            Ok((
                TrainMode::UalPpl { alpha, v_t: args.v_t },
                ModeSnapshot {
                    name: "ual-ppl".into(),
                    alpha: Some(alpha),
                    v_t: Some(args.v_t),
                    plan: None,
                },
            ))
        }
    }
}

pub fn resolve_model(args_model: &ModelOverrides, file: &FileConfig, seed: u64) -> ModelConfig {
    let defaults = ModelConfig::default();
    ModelConfig {
        vocab_size: defaults.vocab_size,
        context_length: config::pick(args_model.context_length, file.model.context_length, defaults.context_length),
        embed_dim: config::pick(args_model.embed_dim, file.model.embed_dim, defaults.embed_dim),
        num_layers: config::pick(args_model.num_layers, file.model.num_layers, defaults.num_layers),
        num_heads: config::pick(args_model.num_heads, file.model.num_heads, defaults.num_heads),
        mlp_ratio: config::pick(args_model.mlp_ratio, file.model.mlp_ratio, defaults.mlp_ratio),
        seed,
    }
}

/// Model-shape flags shared by `train` (and mirrored when other commands
/// need a shape, e.g. to interpret a checkpointless run).
#[derive(Debug, Default)]
pub struct ModelOverrides {
    pub context_length: Option<usize>,
    pub embed_dim: Option<usize>,
    pub num_layers: Option<usize>,
    pub num_heads: Option<usize>,
    pub mlp_ratio: Option<usize>,
}

pub fn run(args: &TrainArgs, file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    let (mode, mode_snapshot) = resolve_mode(args)?;
    let overrides = ModelOverrides {
        context_length: args.context_length,
        embed_dim: args.embed_dim,
        num_layers: args.num_layers,
        num_heads: args.num_heads,
        mlp_ratio: args.mlp_ratio,
    };
    let model = resolve_model(&overrides, file, global.seed);
    model.validate()?;

    let defaults = TrainHyper::default();
    let serial = args.serial || file.train.serial.unwrap_or(false);
    let hyper = TrainHyper {
        learning_rate: config::pick(args.learning_rate, file.train.learning_rate, defaults.learning_rate),
        warmup_steps: config::pick(args.warmup_steps, file.train.warmup_steps, defaults.warmup_steps),
        batch_size: config::pick(args.batch_size, file.train.batch_size, defaults.batch_size),
        epochs: config::pick(args.epochs, file.train.epochs, defaults.epochs),
        max_steps: config::pick_opt(args.max_steps, file.train.max_steps),
        clip_norm: config::pick(args.clip_norm, file.train.clip_norm, defaults.clip_norm),
        deterministic: global.deterministic,
        parallel: !serial,
    };
    hyper.validate()?;

    config::claim_run_dir(&args.run_dir)?;
    let metrics_path = args.run_dir.join("metrics.jsonl");
    let checkpoint_path = args.run_dir.join("checkpoint.bin");
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "train",
            global,
            mode: mode_snapshot,
            paths: Paths {
                dataset: args.dataset.display().to_string(),
                metrics: metrics_path.display().to_string(),
                checkpoint: checkpoint_path.display().to_string(),
            },
            model: &model,
            train: &hyper,
        },
    )?;

    let dataset = ual_core::read_jsonl_file(&args.dataset)?;
    log.info(format!(
        "training on {} samples: {} layers, width {}, batch {}",
        dataset.len(),
        model.num_layers,
        model.embed_dim,
        hyper.batch_size
    ));

    // Metrics stream live into a .partial file that is renamed only when
    // the run finishes, so `metrics.jsonl` is complete or absent.
    let partial_path = args.run_dir.join("metrics.jsonl.partial");
    let mut metrics_file = File::create(&partial_path)?;
    let result = tinylm::train(&dataset, &mode, &hyper, &model, Some(&mut metrics_file))?;
    drop(metrics_file);
    std::fs::rename(&partial_path, &metrics_path)?;

    save_checkpoint(&result.params, result.steps, &checkpoint_path)?;

    println!("steps = {}", result.steps);
    println!("final loss = {}", result.final_loss);
    println!("checkpoint = {}", checkpoint_path.display());
    Ok(())
}
