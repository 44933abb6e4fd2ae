//! `ual analyze`: the token-pair clustering study on a checkpoint, with a
//! 2-D projection of the best-separated pair for plotting.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use tinylm::load_checkpoint;
use ual_analysis::{
    extract_features, pair_study, pca_2d, projection_csv, projection_svg, AnalysisError,
    FeatureSet, PairStudyReport,
};

use crate::config::{self, FileConfig, Global, Log};
use crate::error::Failure;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Checkpoint written by `ual train`.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Dataset whose texts are scanned for token features (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Fresh directory for report.json, projection.csv/svg, and the config snapshot.
    #[arg(long)]
    pub run_dir: PathBuf,

    /// Number of token pairs to sample.
    #[arg(long)]
    pub n_pairs: Option<usize>,

    /// Minimum occurrences for a token to enter the pool.
    #[arg(long)]
    pub min_occurrences: Option<usize>,

    /// Maximum feature vectors collected per token.
    #[arg(long)]
    pub cap: Option<usize>,

    /// Run the compute kernels single-threaded (bitwise-identical results).
    #[arg(long)]
    pub serial: bool,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    n_pairs: usize,
    min_occurrences: usize,
    cap: usize,
    serial: bool,
    global: &'a Global,
    paths: Paths,
}

#[derive(Serialize)]
struct Paths {
    checkpoint: String,
    dataset: String,
    report: String,
    projection_csv: String,
    projection_svg: String,
}

pub fn run(args: &AnalyzeArgs, file: &FileConfig, global: &Global, log: &Log) -> Result<(), Failure> {
    let n_pairs = config::pick(args.n_pairs, file.analyze.n_pairs, 100);
    let min_occurrences = config::pick(args.min_occurrences, file.analyze.min_occurrences, 10);
    let cap = config::pick(args.cap, file.analyze.cap, 200);
    let parallel = !args.serial;

    config::claim_run_dir(&args.run_dir)?;
    let report_path = args.run_dir.join("report.json");
    let csv_path = args.run_dir.join("projection.csv");
    let svg_path = args.run_dir.join("projection.svg");
    config::write_snapshot(
        &args.run_dir,
        &Resolved {
            command: "analyze",
            n_pairs,
            min_occurrences,
            cap,
            serial: args.serial,
            global,
            paths: Paths {
                checkpoint: args.checkpoint.display().to_string(),
                dataset: args.dataset.display().to_string(),
                report: report_path.display().to_string(),
                projection_csv: csv_path.display().to_string(),
                projection_svg: svg_path.display().to_string(),
            },
        },
    )?;

    let (params, _step) = load_checkpoint(&args.checkpoint)?;
    let samples = ual_core::read_jsonl_file(&args.dataset)?;
    // The study scans the same text the model was trained on: the
    // instruction immediately followed by the response.
    let corpus: Vec<(String, String)> = samples
        .iter()
        .map(|s| (s.id.clone(), format!("{}{}", s.instruction, s.response)))
        .collect();

    let report = pair_study(
        &params,
        &corpus,
        n_pairs,
        min_occurrences,
        cap,
        global.seed,
        parallel,
    )?;

    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    ual_core::atomic_write(&report_path, &bytes)?;

    match project_best_pair(&params, &corpus, &report, cap, parallel) {
        Ok((csv, svg)) => {
            ual_core::atomic_write(&csv_path, csv.as_bytes())?;
            ual_core::atomic_write(&svg_path, svg.as_bytes())?;
        }
        // A flat feature cloud has no 2-D structure worth plotting; the
        // report is still complete, so note it and move on.
        Err(AnalysisError::DegenerateData) => {
            log.info("projection skipped: best pair's features are degenerate");
        }
        Err(other) => return Err(other.into()),
    }

    println!("pairs = {}", report.pairs.len());
    println!("mean silhouette = {}", report.mean_silhouette);
    Ok(())
}

/// 2-D projection of the highest-silhouette pair's features, ties broken by
/// token ids so the choice is deterministic.
fn project_best_pair(
    params: &tinylm::Parameters<f32>,
    corpus: &[(String, String)],
    report: &PairStudyReport,
    cap: usize,
    parallel: bool,
) -> Result<(String, String), AnalysisError> {
    let best = report
        .pairs
        .iter()
        .max_by(|p, q| {
            p.score
                .partial_cmp(&q.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(q.token_a.cmp(&p.token_a))
                .then(q.token_b.cmp(&p.token_b))
        })
        .expect("report has at least one pair");

    let set = extract_features(params, corpus, &[best.token_a, best.token_b], cap, parallel)?;
    let mut rows = set.of_token(best.token_a);
    rows.extend(set.of_token(best.token_b));
    let matrix = FeatureSet::matrix(&rows);
    let token_ids: Vec<usize> = rows.iter().map(|r| r.token_id).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.token_id == best.token_b).collect();

    let proj = pca_2d(&matrix, set.dim)?;
    let title = format!(
        "tokens {} vs {} (silhouette {:.4})",
        best.token_a, best.token_b, best.score
    );
    Ok((
        projection_csv(&token_ids, &labels, &proj),
        projection_svg(&labels, &proj, &title),
    ))
}
