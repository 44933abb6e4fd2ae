//! The acceptance gate: ten numbered end-to-end checks across the whole
//! workspace, each printing one `criterion NN: PASS/FAIL` line (run with
//! `-- --nocapture` to see them as they go). Tolerances and runtime budgets
//! are pinned as constants next to each check.
//!
//! Criterion 7 is a qualitative-trend study and is marked *soft*: its
//! verdict line reports whether the trend held, but only mechanical
//! failures (a run crashing, an unreadable report) fail the test.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tinylm::{Batch, ModelConfig, Parameters, TrainHyper, TrainMode};
use ual_core::Sample;
use ual_loss::{sequence_loss, SequenceLossSpec};

fn pass(n: usize, detail: impl AsRef<str>) {
    println!("criterion {n:02}: PASS - {}", detail.as_ref());
}

fn within(elapsed: Duration, budget: Duration, what: &str) {
    assert!(
        elapsed <= budget,
        "{what} took {elapsed:?}, over the {budget:?} budget"
    );
}

// --------------------------------------------------------------------------
// 1. Solver correctness against a bisection oracle.
// --------------------------------------------------------------------------

const SOLVER_INSTANCES: usize = 1000;
const SOLVER_TOL: f64 = 1e-9;
const SOLVER_BUDGET: Duration = Duration::from_secs(5);

/// Independent oracle: the capped mean is nondecreasing in beta, so bisect.
fn bisect_beta(us: &[f64], alpha: f64, v_t: f64) -> f64 {
    let mean = |beta: f64| -> f64 {
        us.iter().map(|&u| (beta * u).min(v_t)).sum::<f64>() / us.len() as f64
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while mean(hi) < alpha {
        hi *= 2.0;
        assert!(hi < 1e15, "oracle bracket exploded; instance infeasible?");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_01_solver_hits_the_target_mean_on_random_instances() {
    let start = Instant::now();
    let v_t = 0.99;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..SOLVER_INSTANCES {
        let n = rng.gen_range(1..=512);
        let us: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let supremum = ual_core::mean_supremum(&us, v_t);
        let alpha = loop {
            let a = rng.gen::<f64>() * 0.9 * supremum;
            if a > 0.0 {
                break a;
            }
        };

        let beta = ual_core::solve_beta(&us, alpha, v_t).expect("feasible by construction");
        let mean = ual_core::mapped_mean(&us, beta, v_t);
        assert!(
            (mean - alpha).abs() <= SOLVER_TOL,
            "solver missed: n={n} alpha={alpha} mean={mean}"
        );

        let oracle_beta = bisect_beta(&us, alpha, v_t);
        let oracle_mean =
            us.iter().map(|&u| (oracle_beta * u).min(v_t)).sum::<f64>() / us.len() as f64;
        assert!(
            (mean - oracle_mean).abs() <= SOLVER_TOL,
            "solver and bisection disagree: {mean} vs {oracle_mean}"
        );
        worst = worst.max((mean - alpha).abs());
    }
    within(start.elapsed(), SOLVER_BUDGET, "solver sweep");
    pass(1, format!("{SOLVER_INSTANCES} instances, worst |mean-alpha| = {worst:.2e}"));
}

// --------------------------------------------------------------------------
// 2. Loss identities.
// --------------------------------------------------------------------------

const LOSS_EXACT_TOL: f64 = 1e-12;
const LOSS_UNIFORM_TOL: f64 = 1e-9;
const LOSS_BUDGET: Duration = Duration::from_secs(1);

#[test]
fn criterion_02_loss_identities_hold() {
    let start = Instant::now();
    let vocab = 17usize;
    let positions = 9usize;
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let logits: Vec<f64> = (0..positions * vocab).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let targets: Vec<usize> = (0..positions).map(|_| rng.gen_range(0..vocab)).collect();
    let mask: Vec<bool> = (0..positions).map(|p| p != 2).collect();
    let loss_at = |v: f64, logits: &[f64]| -> f64 {
        sequence_loss(&SequenceLossSpec {
            logits,
            vocab_size: vocab,
            targets: &targets,
            loss_mask: &mask,
            smoothing: v,
        })
        .unwrap()
    };

    // v = 0 is plain cross-entropy, recomputed here from the definition.
    let mut plain = 0.0;
    let mut counted = 0usize;
    for p in 0..positions {
        if !mask[p] {
            continue;
        }
        let row = &logits[p * vocab..(p + 1) * vocab];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        plain += lse - row[targets[p]];
        counted += 1;
    }
    plain /= counted as f64;
    let v0 = loss_at(0.0, &logits);
    assert!((v0 - plain).abs() <= LOSS_EXACT_TOL, "{v0} vs {plain}");

    // Uniform logits score ln V for every smoothing value.
    let flat = vec![0.37f64; positions * vocab];
    let ln_v = (vocab as f64).ln();
    for &v in &[0.0, 0.1, 0.5, 0.9, 0.99] {
        let loss = loss_at(v, &flat);
        assert!((loss - ln_v).abs() <= LOSS_UNIFORM_TOL, "v={v}: {loss} vs {ln_v}");
    }

    // The loss is affine in v, so it interpolates exactly.
    let (va, vb, t) = (0.1, 0.8, 0.3);
    let blend = loss_at((1.0 - t) * va + t * vb, &logits);
    let mix = (1.0 - t) * loss_at(va, &logits) + t * loss_at(vb, &logits);
    assert!((blend - mix).abs() <= LOSS_EXACT_TOL, "{blend} vs {mix}");

    within(start.elapsed(), LOSS_BUDGET, "loss identities");
    pass(2, "plain-CE, uniform-logits, and affine-interpolation identities");
}

// --------------------------------------------------------------------------
// 3. Gradient exactness by central differences, 64-bit.
// --------------------------------------------------------------------------

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_BUDGET: Duration = Duration::from_secs(120);

/// Wide random weights: at training-init scale the attention score-path
/// gradients sink below what central differences resolve in f64, and the
/// check would measure round-off instead of correctness.
fn generic_point(config: &ModelConfig, seed: u64) -> Parameters<f64> {
    let mut params = Parameters::<f64>::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wide = Normal::new(0.0, 0.4).unwrap();
    let near_one = Normal::new(1.0, 0.1).unwrap();
    for tensor in params.named_tensors_mut() {
        let gain = tensor.name.ends_with("gain");
        for value in tensor.data.iter_mut() {
            *value = if gain { near_one.sample(&mut rng) } else { wide.sample(&mut rng) };
        }
    }
    params
}

/// The objective, reassembled out of public pieces for differencing.
fn composed_loss(params: &Parameters<f64>, batch: &Batch<f64>) -> f64 {
    let v = params.config.vocab_size;
    let out = tinylm::forward(params, &batch.tokens, batch.batch, batch.seq, false, false).unwrap();
    let mut total = 0.0;
    for b in 0..batch.batch {
        total += sequence_loss(&SequenceLossSpec {
            logits: &out.logits[b * batch.seq * v..(b + 1) * batch.seq * v],
            vocab_size: v,
            targets: &batch.targets[b * batch.seq..(b + 1) * batch.seq],
            loss_mask: &batch.mask[b * batch.seq..(b + 1) * batch.seq],
            smoothing: batch.smoothing[b],
        })
        .unwrap();
    }
    total / batch.batch as f64
}

#[test]
fn criterion_03_analytic_gradients_match_central_differences() {
    let start = Instant::now();
    let config = ModelConfig {
        vocab_size: 12,
        context_length: 16,
        embed_dim: 16,
        num_layers: 2,
        num_heads: 2,
        mlp_ratio: 2,
        seed: 0,
    };
    let (b, t) = (2usize, 16usize);
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let tokens: Vec<usize> = (0..b * t).map(|_| rng.gen_range(0..config.vocab_size)).collect();
    let targets: Vec<usize> = (0..b * t).map(|_| rng.gen_range(0..config.vocab_size)).collect();
    // Mask out a short prefix per row, like an instruction would be.
    let mask: Vec<bool> = (0..b * t).map(|i| i % t >= 2).collect();
    let batch = Batch {
        tokens,
        targets,
        mask,
        smoothing: vec![0.0, 0.2],
        ids: vec!["a".into(), "b".into()],
        batch: b,
        seq: t,
    };

    let mut params = generic_point(&config, 3300);
    let (loss, grads) = tinylm::loss_and_grad(&params, &batch, false).unwrap();
    let recomposed = composed_loss(&params, &batch);
    assert!((loss - recomposed).abs() <= 1e-12, "{loss} vs {recomposed}");

    let grad_tensors = grads.named_tensors();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checked = 0usize;
    for ti in 0..grad_tensors.len() {
        for idx in 0..grad_tensors[ti].data.len() {
            let original = params.named_tensors_mut()[ti].data[idx];
            params.named_tensors_mut()[ti].data[idx] = original + FD_STEP;
            let up = composed_loss(&params, &batch);
            params.named_tensors_mut()[ti].data[idx] = original - FD_STEP;
            let down = composed_loss(&params, &batch);
            params.named_tensors_mut()[ti].data[idx] = original;

            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grad_tensors[ti].data[idx];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-8);
            if rel > worst.0 {
                worst = (rel, format!("{}[{idx}]", grad_tensors[ti].name));
            }
            checked += 1;
        }
    }
    assert!(
        worst.0 <= FD_TOL,
        "worst relative error {:.3e} at {} over {checked} coordinates",
        worst.0,
        worst.1
    );
    within(start.elapsed(), FD_BUDGET, "finite-difference sweep");
    pass(3, format!("{checked} coordinates, worst relative error {:.2e}", worst.0));
}

// --------------------------------------------------------------------------
// 4. Equivalence ladder, bit-identical.
// --------------------------------------------------------------------------

fn ladder_dataset(constant_u: Option<f64>) -> Vec<Sample> {
    (0..6)
        .map(|i| {
            let s = Sample::new(format!("s{i}"), format!("{i}+{i}="), format!("{}", 2 * i));
            match constant_u {
                Some(u) => s.with_uncertainty(u),
                None => s,
            }
        })
        .collect()
}

fn ladder_run(dataset: &[Sample], mode: &TrainMode) -> (Vec<u8>, Parameters<f32>) {
    let config = ModelConfig {
        context_length: 32,
        embed_dim: 16,
        num_layers: 1,
        num_heads: 2,
        mlp_ratio: 2,
        seed: 40,
        ..ModelConfig::default()
    };
    let hyper = TrainHyper {
        learning_rate: 1e-3,
        warmup_steps: 2,
        batch_size: 3,
        epochs: 2,
        max_steps: None,
        clip_norm: 1.0,
        deterministic: true,
        parallel: true,
    };
    let mut metrics = Vec::new();
    let result = tinylm::train(dataset, mode, &hyper, &config, Some(&mut metrics)).unwrap();
    (metrics, result.params)
}

#[test]
fn criterion_04_equivalence_ladder_is_bit_identical() {
    let plain = ladder_dataset(None);
    let (sft_metrics, sft_params) = ladder_run(&plain, &TrainMode::Sft);
    let (ls0_metrics, ls0_params) = ladder_run(&plain, &TrainMode::LabelSmoothing { alpha: 0.0 });
    assert_eq!(sft_metrics, ls0_metrics, "sft vs ls(0): metrics bytes differ");
    assert_eq!(sft_params, ls0_params, "sft vs ls(0): parameters differ");

    let alpha = 0.1;
    let constant = ladder_dataset(Some(0.5));
    let plan = ual_core::build_plan(&constant, alpha, 0.99).unwrap();
    for entry in &plan.entries {
        // A few ulps of solver arithmetic; the f32 cast inside training
        // collapses this, which is what makes the runs bit-identical.
        assert!(
            (entry.value - alpha).abs() <= 1e-15,
            "constant-uncertainty plan should solve to alpha, got {}",
            entry.value
        );
    }
    let (ual_metrics, ual_params) = ladder_run(&constant, &TrainMode::Ual { plan });
    let (ls_metrics, ls_params) = ladder_run(&constant, &TrainMode::LabelSmoothing { alpha });
    assert_eq!(ual_metrics, ls_metrics, "ual(const) vs ls(alpha): metrics bytes differ");
    assert_eq!(ual_params, ls_params, "ual(const) vs ls(alpha): parameters differ");

    pass(4, "sft == ls(0) and ual(const u) == ls(alpha), metrics and weights");
}

// --------------------------------------------------------------------------
// 5. Single-sample overfit sanity.
// --------------------------------------------------------------------------

const OVERFIT_LOSS: f64 = 0.01;
const OVERFIT_PPL: f64 = 1.02;

#[test]
fn criterion_05_single_sample_overfit_memorizes() {
    let dataset = vec![Sample::new("only", "count:", "one two three")];
    let config = ModelConfig {
        context_length: 32,
        embed_dim: 32,
        num_layers: 2,
        num_heads: 2,
        mlp_ratio: 2,
        seed: 50,
        ..ModelConfig::default()
    };
    let hyper = TrainHyper {
        learning_rate: 1e-2,
        warmup_steps: 10,
        batch_size: 1,
        epochs: 500,
        max_steps: Some(500),
        clip_norm: 1.0,
        deterministic: true,
        parallel: true,
    };
    let result = tinylm::train(&dataset, &TrainMode::Sft, &hyper, &config, None).unwrap();
    assert!(
        result.final_loss < OVERFIT_LOSS,
        "loss {} after {} steps",
        result.final_loss,
        result.steps
    );
    let report = tinylm::evaluate_ppl(&result.params, &dataset, true).unwrap();
    assert!(report.mean < OVERFIT_PPL, "ppl {}", report.mean);
    pass(5, format!("loss {:.2e}, ppl {:.6}", result.final_loss, report.mean));
}

// --------------------------------------------------------------------------
// 6. Silhouette and principal-component oracles.
// --------------------------------------------------------------------------

const PCA_TOL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);

/// Straight double-loop silhouette written from the definition.
fn silhouette_oracle(features: &[f64], dim: usize, labels: &[bool]) -> f64 {
    let n = labels.len();
    let dist = |i: usize, j: usize| -> f64 {
        features[i * dim..(i + 1) * dim]
            .iter()
            .zip(&features[j * dim..(j + 1) * dim])
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let (mut same, mut same_n, mut other, mut other_n) = (0.0, 0usize, 0.0, 0usize);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = dist(i, j);
            if labels[i] == labels[j] {
                same += d;
                same_n += 1;
            } else {
                other += d;
                other_n += 1;
            }
        }
        let a = same / same_n as f64;
        let b = other / other_n as f64;
        let m = a.max(b);
        total += if m == 0.0 { 0.0 } else { (b - a) / m };
    }
    total / n as f64
}

#[test]
fn criterion_06_clustering_metrics_match_their_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6006);

    for case in 0..100 {
        let n = rng.gen_range(4..=200);
        let dim = rng.gen_range(1..=32);
        let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut labels = vec![false, false, true, true];
        labels.extend((4..n).map(|_| rng.gen_bool(0.5)));
        let got = ual_analysis::silhouette(&features, dim, &labels).unwrap();
        let want = silhouette_oracle(&features, dim, &labels);
        assert_eq!(got, want, "case {case}");
    }

    for (n, dim) in [(50usize, 8usize), (120, 16), (40, 3)] {
        let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let proj = ual_analysis::pca_2d(&features, dim).unwrap();

        // SVD oracle on the centered matrix, same sign convention.
        let mut mean = vec![0.0f64; dim];
        for row in features.chunks(dim) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let centered: Vec<f64> = features
            .chunks(dim)
            .flat_map(|row| row.iter().zip(&mean).map(|(&x, &m)| x - m))
            .collect();
        let svd = nalgebra::DMatrix::from_row_slice(n, dim, &centered).svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors");
        let total: f64 = svd.singular_values.iter().map(|&s| s * s).sum();
        for k in 0..2 {
            let mut direction: Vec<f64> = (0..dim).map(|i| v_t[(k, i)]).collect();
            let largest = (0..dim)
                .max_by(|&i, &j| direction[i].abs().partial_cmp(&direction[j].abs()).unwrap())
                .unwrap();
            if direction[largest] < 0.0 {
                for x in direction.iter_mut() {
                    *x = -*x;
                }
            }
            for i in 0..dim {
                assert!(
                    (proj.basis[k][i] - direction[i]).abs() <= PCA_TOL,
                    "n={n} d={dim} basis[{k}][{i}]"
                );
            }
            let explained = svd.singular_values[k] * svd.singular_values[k] / total;
            assert!((proj.explained[k] - explained).abs() <= PCA_TOL);
        }
    }

    within(start.elapsed(), ORACLE_BUDGET, "clustering oracles");
    pass(6, "silhouette exact on 100 instances; PCA vs SVD within 1e-8");
}

// --------------------------------------------------------------------------
// 7. Qualitative trend on the two-regime corpus (soft criterion).
// --------------------------------------------------------------------------

const TREND_SEEDS: [u64; 5] = [11, 12, 13, 14, 15];
const TREND_BUDGET: Duration = Duration::from_secs(1800);

fn ual_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ual"))
}

fn check(out: Output, what: &str) -> Output {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn mean_silhouette_of(report_path: &Path) -> f64 {
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert!(
        !report["pairs"].as_array().unwrap().is_empty(),
        "report has no pairs: {}",
        report_path.display()
    );
    report["mean_silhouette"].as_f64().unwrap()
}

/// One matched pair of runs: same corpus, same seed, same hyperparameters,
/// only the training mode differs. Returns (sft, ual) mean silhouettes.
fn trend_one_seed(root: &Path, seed: u64) -> (f64, f64) {
    let dir = root.join(format!("seed-{seed}"));
    let seed_s = seed.to_string();

    check(
        ual_bin()
            .arg("gen-corpus")
            .arg("--run-dir").arg(dir.join("gen"))
            .arg("--low").arg("100")
            .arg("--high").arg("100")
            .arg("--seed").arg(&seed_s)
            .output().unwrap(),
        "gen-corpus",
    );
    check(
        ual_bin()
            .arg("annotate")
            .arg("--dataset").arg(dir.join("gen/corpus.jsonl"))
            .arg("--run-dir").arg(dir.join("ann"))
            .arg("--endpoint").arg(format!("mock:table={}", dir.join("gen/scores.jsonl").display()))
            .arg("--deterministic")
            .arg("--log-level").arg("quiet")
            .output().unwrap(),
        "annotate",
    );
    check(
        ual_bin()
            .arg("plan")
            .arg("--dataset").arg(dir.join("ann/annotated.jsonl"))
            .arg("--run-dir").arg(dir.join("plan"))
            .arg("--alpha").arg("0.1")
            .output().unwrap(),
        "plan",
    );

    let train = |mode_args: &[&str], run: &str| {
        let mut cmd = ual_bin();
        cmd.arg("train")
            .arg("--dataset").arg(dir.join("ann/annotated.jsonl"))
            .arg("--run-dir").arg(dir.join(run))
            .arg("--context-length").arg("64")
            .arg("--embed-dim").arg("32")
            .arg("--num-layers").arg("2")
            .arg("--num-heads").arg("2")
            .arg("--mlp-ratio").arg("2")
            .arg("--batch-size").arg("8")
            .arg("--epochs").arg("16")
            .arg("--learning-rate").arg("3e-3")
            .arg("--warmup-steps").arg("10")
            .arg("--seed").arg(&seed_s)
            .arg("--deterministic")
            .arg("--log-level").arg("quiet");
        for a in mode_args {
            cmd.arg(a);
        }
        check(cmd.output().unwrap(), "train");
    };
    train(&["--mode", "sft"], "sft");
    let plan_path = dir.join("plan/plan.txt").display().to_string();
    train(&["--mode", "ual", "--plan", &plan_path], "ual");

    let analyze = |ckpt: &str, run: &str| {
        check(
            ual_bin()
                .arg("analyze")
                .arg("--checkpoint").arg(dir.join(ckpt))
                .arg("--dataset").arg(dir.join("ann/annotated.jsonl"))
                .arg("--run-dir").arg(dir.join(run))
                .arg("--n-pairs").arg("40")
                .arg("--min-occurrences").arg("10")
                .arg("--cap").arg("60")
                .arg("--seed").arg("777") // one analysis seed for both modes
                .arg("--log-level").arg("quiet")
                .output().unwrap(),
            "analyze",
        );
        mean_silhouette_of(&dir.join(run).join("report.json"))
    };
    let sft = analyze("sft/checkpoint.bin", "study-sft");
    let ual = analyze("ual/checkpoint.bin", "study-ual");
    (sft, ual)
}

#[test]
fn criterion_07_uncertainty_training_trend_on_two_regime_corpus() {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    let mut wins = 0usize;
    for &seed in &TREND_SEEDS {
        let (sft, ual) = trend_one_seed(root.path(), seed);
        if ual >= sft {
            wins += 1;
        }
        rows.push((seed, sft, ual));
    }

    // The study report is emitted regardless of the verdict.
    println!("two-regime study (mean pair silhouette, matched runs):");
    println!("  seed    sft       ual       winner");
    for (seed, sft, ual) in &rows {
        println!(
            "  {seed:<7} {sft:<9.5} {ual:<9.5} {}",
            if ual >= sft { "ual" } else { "sft" }
        );
    }
    println!("  ual >= sft in {wins}/{} seeds", TREND_SEEDS.len());

    within(start.elapsed(), TREND_BUDGET, "trend study");
    // Soft criterion: desk-scale models need not reproduce the effect, so
    // the verdict line tells the truth but never panics on a trend miss.
    if wins >= 3 {
        pass(7, format!("(soft) ual >= sft in {wins}/5 seeds"));
    } else {
        println!("criterion 07: FAIL (soft) - ual >= sft in only {wins}/5 seeds");
    }
}

// --------------------------------------------------------------------------
// 8. Perplexity-ratio smoothing contract.
// --------------------------------------------------------------------------

const PPL_TOL: f64 = 1e-12;

#[test]
fn criterion_08_ppl_ratio_smoothing_contract() {
    use uncertainty_sources::{ppl_smoothing, PplState};
    let (alpha, v_t) = (0.1, 0.99);

    // First observation defines the mean: ratio 1, so exactly alpha.
    let mut state = PplState::with_default_decay();
    assert_eq!(ppl_smoothing(8.0, &mut state, alpha, v_t).unwrap(), alpha);

    // Twice the running mean doubles the smoothing.
    let v = ppl_smoothing(16.0, &mut state, alpha, v_t).unwrap();
    assert!((v - 2.0 * alpha).abs() <= PPL_TOL, "{v}");

    // A wild outlier is capped at v_t.
    let mut spiked = PplState::with_default_decay();
    ppl_smoothing(8.0, &mut spiked, alpha, v_t).unwrap();
    assert_eq!(ppl_smoothing(8e4, &mut spiked, alpha, v_t).unwrap(), v_t);

    // The running mean follows the EMA closed form.
    let rho = 0.9;
    let ppls = [5.0, 7.5, 6.25, 9.0, 4.5, 8.0];
    let mut ema_state = PplState::new(rho);
    for &p in &ppls {
        ppl_smoothing(p, &mut ema_state, alpha, v_t).unwrap();
    }
    let mut closed = ppls[0];
    for &p in &ppls[1..] {
        closed = rho * closed + (1.0 - rho) * p;
    }
    let got = ema_state.running_mean().unwrap();
    assert!((got - closed).abs() <= PPL_TOL, "{got} vs {closed}");

    pass(8, "ratio anchoring, truncation, and EMA closed form");
}

// --------------------------------------------------------------------------
// 9. Determinism of train and analyze, byte for byte.
// --------------------------------------------------------------------------

#[test]
fn criterion_09_seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.jsonl");
    let samples: Vec<Sample> = (0..8)
        .map(|i| Sample::new(format!("s{i}"), format!("{i}*2="), format!("{}", 2 * i)))
        .collect();
    let mut bytes = Vec::new();
    ual_core::write_jsonl(&mut bytes, &samples).unwrap();
    fs::write(&dataset, bytes).unwrap();

    let train = |run: &str| -> PathBuf {
        let run_dir = dir.path().join(run);
        check(
            ual_bin()
                .arg("train")
                .arg("--dataset").arg(&dataset)
                .arg("--run-dir").arg(&run_dir)
                .arg("--mode").arg("ls")
                .arg("--alpha").arg("0.1")
                .arg("--context-length").arg("32")
                .arg("--embed-dim").arg("16")
                .arg("--num-layers").arg("1")
                .arg("--num-heads").arg("2")
                .arg("--mlp-ratio").arg("2")
                .arg("--batch-size").arg("4")
                .arg("--epochs").arg("2")
                .arg("--learning-rate").arg("1e-3")
                .arg("--warmup-steps").arg("2")
                .arg("--seed").arg("90")
                .arg("--deterministic")
                .arg("--log-level").arg("quiet")
                .output().unwrap(),
            "train",
        );
        run_dir
    };
    let t1 = train("t1");
    let t2 = train("t2");
    for file in ["metrics.jsonl", "checkpoint.bin"] {
        assert_eq!(
            fs::read(t1.join(file)).unwrap(),
            fs::read(t2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let analyze = |run: &str| -> PathBuf {
        let run_dir = dir.path().join(run);
        check(
            ual_bin()
                .arg("analyze")
                .arg("--checkpoint").arg(t1.join("checkpoint.bin"))
                .arg("--dataset").arg(&dataset)
                .arg("--run-dir").arg(&run_dir)
                .arg("--n-pairs").arg("4")
                .arg("--min-occurrences").arg("3")
                .arg("--cap").arg("16")
                .arg("--seed").arg("90")
                .arg("--log-level").arg("quiet")
                .output().unwrap(),
            "analyze",
        );
        run_dir
    };
    let z1 = analyze("z1");
    let z2 = analyze("z2");
    for file in ["report.json", "projection.csv", "projection.svg"] {
        assert_eq!(
            fs::read(z1.join(file)).unwrap(),
            fs::read(z2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    pass(9, "train and analyze outputs byte-identical across reruns");
}

// --------------------------------------------------------------------------
// 10. Annotation pipeline: order, idempotence, losslessness.
// --------------------------------------------------------------------------

#[test]
fn criterion_10_annotation_is_ordered_idempotent_and_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.jsonl");
    let ids: Vec<String> = (0..12).map(|i| format!("item-{i:02}")).collect();
    let samples: Vec<Sample> = ids
        .iter()
        .map(|id| Sample::new(id.clone(), "inspect", format!("payload {id}")))
        .collect();
    let mut bytes = Vec::new();
    ual_core::write_jsonl(&mut bytes, &samples).unwrap();
    fs::write(&dataset, bytes).unwrap();

    let cache = dir.path().join("cache.jsonl");
    let annotate = |run: &str| -> (PathBuf, String) {
        let run_dir = dir.path().join(run);
        let out = check(
            ual_bin()
                .arg("annotate")
                .arg("--dataset").arg(&dataset)
                .arg("--run-dir").arg(&run_dir)
                .arg("--endpoint").arg("mock:fixed=37")
                .arg("--cache").arg(&cache)
                .arg("--deterministic")
                .arg("--log-level").arg("quiet")
                .output().unwrap(),
            "annotate",
        );
        (run_dir, String::from_utf8(out.stdout).unwrap())
    };

    let (cold_dir, cold_stdout) = annotate("cold");
    assert!(cold_stdout.contains("0/12 cache hits, 12 judge calls"), "{cold_stdout}");

    let annotated = ual_core::read_jsonl_file(&cold_dir.join("annotated.jsonl")).unwrap();
    let out_ids: Vec<&str> = annotated.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(out_ids, ids.iter().map(String::as_str).collect::<Vec<_>>(), "order changed");
    for sample in &annotated {
        assert_eq!(sample.uncertainty, Some(0.37));
    }

    let (warm_dir, warm_stdout) = annotate("warm");
    assert!(
        warm_stdout.contains("12/12 cache hits, 0 judge calls"),
        "warm rerun must be served from cache alone: {warm_stdout}"
    );
    assert_eq!(
        fs::read(cold_dir.join("annotated.jsonl")).unwrap(),
        fs::read(warm_dir.join("annotated.jsonl")).unwrap(),
        "idempotence: warm output differs"
    );

    pass(10, "order preserved, warm rerun makes zero calls, every sample kept once");
}
