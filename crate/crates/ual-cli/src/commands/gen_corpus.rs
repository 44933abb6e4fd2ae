//! `ual gen-corpus`: writes the synthetic two-regime corpus and the mock
//! judge's score table for it.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use crate::config::{self, FileConfig, Global, Log};
use crate::corpus::{self, CorpusSpec};
use crate::error::Failure;

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Fresh directory for corpus.jsonl, scores.jsonl, and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    /// Number of low-entropy addition-drill samples.
    #[arg(long)]
    pub low: Option<usize>,

    /// Number of high-entropy random-prose samples.
    #[arg(long)]
    pub high: Option<usize>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    global: &'a Global,
    paths: Paths,
    corpus: &'a CorpusSpec,
}

#[derive(Serialize)]
struct Paths {
    corpus: String,
    scores: String,
}

pub fn run(args: &GenCorpusArgs, file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    let spec = CorpusSpec {
        low: config::pick(args.low, file.corpus.low, 120),
        high: config::pick(args.high, file.corpus.high, 120),
        seed: global.seed,
    };
    if spec.low + spec.high == 0 {
        return Err(Failure::input("corpus would be empty: low + high must be at least 1"));
    }

    config::claim_run_dir(&args.run_dir)?;
    let corpus_path = args.run_dir.join("corpus.jsonl");
    let scores_path = args.run_dir.join("scores.jsonl");
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "gen-corpus",
            global,
            paths: Paths {
                corpus: corpus_path.display().to_string(),
                scores: scores_path.display().to_string(),
            },
            corpus: &spec,
        },
    )?;

    let (samples, scores) = corpus::generate(&spec);

    let mut corpus_bytes = Vec::new();
    ual_core::write_jsonl(&mut corpus_bytes, &samples)?;
    ual_core::atomic_write(&corpus_path, &corpus_bytes)?;

    let mut score_bytes = Vec::new();
    for row in &scores {
        serde_json::to_writer(&mut score_bytes, row)?;
        score_bytes.push(b'\n');
    }
    ual_core::atomic_write(&scores_path, &score_bytes)?;

    log.debug(format!("corpus at {}", corpus_path.display()));
    println!(
        "wrote {} samples ({} low-entropy, {} high-entropy)",
        samples.len(),
        spec.low,
        spec.high
    );
    Ok(())
}
