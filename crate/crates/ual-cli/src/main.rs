//! `ual` — one binary for the whole pipeline: generate or annotate a
//! dataset, solve a smoothing plan, train, evaluate perplexity, and run the
//! token-pair clustering study.
//!
//! Settings resolve in three layers (defaults, then `--config` file, then
//! flags), every run directory gets a `config.toml` snapshot of the resolved
//! view before any work happens, and all outputs are written atomically.
//! Exit codes: 0 success, 2 input error, 3 judge/service error, 4 infeasible
//! constraint, 5 internal invariant violation.

mod commands;
mod config;
mod corpus;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{FileConfig, Global, Log, LogLevel};
use crate::error::Failure;

#[derive(Debug, Parser)]
#[command(name = "ual", version, about = "Uncertainty-aware training pipeline for a byte-level model")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for everything stochastic in the subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Pin wall-clock outputs (timings, timestamps) to zero so identical
    /// runs are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Stderr verbosity; primary outputs are unaffected.
    #[arg(long, global = true, value_enum)]
    log_level: Option<LogLevel>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic two-regime corpus and its mock score table.
    GenCorpus(commands::gen_corpus::GenCorpusArgs),
    /// Score every sample with the judge and write the annotated dataset.
    Annotate(commands::annotate::AnnotateArgs),
    /// Solve per-sample smoothing values for an annotated dataset.
    Plan(commands::plan::PlanArgs),
    /// Train the byte-level model.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint's perplexity on a dataset.
    Eval(commands::eval::EvalArgs),
    /// Run the token-pair clustering study on a checkpoint.
    Analyze(commands::analyze::AnalyzeArgs),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let global = Global {
        seed: config::pick(cli.seed, file.global.seed, 0),
        deterministic: cli.deterministic || file.global.deterministic.unwrap_or(false),
        log_level: config::pick(cli.log_level, file.global.log_level, LogLevel::Info),
    };
    let log = Log { level: global.log_level };

    match &cli.command {
        Command::GenCorpus(args) => commands::gen_corpus::run(args, &file, &global, &log),
        Command::Annotate(args) => commands::annotate::run(args, &file, &global, &log),
        Command::Plan(args) => commands::plan::run(args, &file, &global, &log),
        Command::Train(args) => commands::train::run(args, &file, &global, &log),
        Command::Eval(args) => commands::eval::run(args, &file, &global, &log),
        Command::Analyze(args) => commands::analyze::run(args, &file, &global, &log),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
