//! The training loop: shuffling, batching, per-mode smoothing values, Adam
//! updates with warmup and gradient clipping, and per-step metrics.
//!
//! Determinism contract: with the same dataset, mode, hyperparameters, and
//! model seed, two runs produce bitwise-identical parameters and — when
//! `deterministic` is set, which zeroes the wall-clock field — byte-identical
//! metrics lines. Shuffling uses a counter-based RNG stream separate from the
//! one that draws initial weights, so data order and init never entangle.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ual_core::{Sample, SmoothingPlan};
use uncertainty_sources::{ppl_smoothing, PplState};

use crate::adam::{adam_step, clip_global_norm, AdamState};
use crate::config::ModelConfig;
use crate::data::{encode_sample, make_batch, EncodedRow};
use crate::error::TinyLmError;
use crate::model::{backward, loss_and_grad, loss_grad_from_logits, per_sample_nll, run_forward};
use crate::params::Parameters;

/// How per-sample smoothing values are chosen during training.
#[derive(Debug, Clone)]
pub enum TrainMode {
    /// Plain cross-entropy: every smoothing value is zero.
    Sft,
    /// One fixed smoothing value for every sample.
    LabelSmoothing { alpha: f64 },
    /// Per-sample values taken from a precomputed plan, keyed by sample id.
    Ual { plan: SmoothingPlan },
    /// Per-sample values derived online from each sample's perplexity under
    /// the current model, via a running-mean ratio capped at `v_t`.
    UalPpl { alpha: f64, v_t: f64 },
}

impl TrainMode {
    fn name(&self) -> &'static str {
        match self {
            TrainMode::Sft => "sft",
            TrainMode::LabelSmoothing { .. } => "label-smoothing",
            TrainMode::Ual { .. } => "ual",
            TrainMode::UalPpl { .. } => "ual-ppl",
        }
    }
}

/// Optimization hyperparameters. `Default` gives the small-model desk setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// Steps of linear learning-rate warmup; the rate is constant afterward.
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Hard cap on optimizer steps across all epochs, if set.
    pub max_steps: Option<usize>,
    /// Gradients are rescaled so their global L2 norm never exceeds this.
    pub clip_norm: f64,
    /// Zeroes the wall-clock field in metrics so runs are byte-comparable.
    pub deterministic: bool,
    /// Use the multi-threaded kernels (bitwise-identical to single-threaded).
    pub parallel: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 3e-4,
            warmup_steps: 100,
            batch_size: 16,
            epochs: 1,
            max_steps: None,
            clip_norm: 1.0,
            deterministic: false,
            parallel: true,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), TinyLmError> {
        let fail = |msg: String| Err(TinyLmError::InvalidHyper(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be finite and positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.max_steps == Some(0) {
            return fail("max_steps must be at least 1 when set".into());
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return fail(format!("clip_norm must be finite and positive, got {}", self.clip_norm));
        }
        Ok(())
    }
}

/// One metrics line per optimizer step, written as JSON Lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub loss: f64,
    /// Mean smoothing value over the step's batch.
    pub mean_v: f64,
    pub lr: f64,
    /// Wall-clock per step; zero when running deterministically.
    pub elapsed_ms: u64,
}

/// Everything a finished run hands back.
#[derive(Debug)]
pub struct TrainResult {
    pub params: Parameters<f32>,
    pub steps: u64,
    pub records: Vec<MetricsRecord>,
    pub final_loss: f64,
}

fn warmup_lr(base: f64, warmup_steps: usize, step: u64) -> f64 {
    if warmup_steps == 0 || step as usize >= warmup_steps {
        base
    } else {
        base * (step as f64 + 1.0) / warmup_steps as f64
    }
}

/// Per-sample smoothing values fixed before the run starts (every mode but
/// the perplexity-driven one).
fn static_smoothing(
    dataset: &[Sample],
    mode: &TrainMode,
) -> Result<Option<Vec<f64>>, TinyLmError> {
    match mode {
        TrainMode::Sft => Ok(Some(vec![0.0; dataset.len()])),
        TrainMode::LabelSmoothing { alpha } => {
            if !(alpha.is_finite() && (0.0..1.0).contains(alpha)) {
                return Err(TinyLmError::InvalidHyper(format!(
                    "label smoothing alpha must lie in [0, 1), got {alpha}"
                )));
            }
            Ok(Some(vec![*alpha; dataset.len()]))
        }
        TrainMode::Ual { plan } => {
            let by_id: HashMap<&str, f64> = plan
                .entries
                .iter()
                .map(|e| (e.sample_id.as_str(), e.value))
                .collect();
            let mut values = Vec::with_capacity(dataset.len());
            for sample in dataset {
                match by_id.get(sample.id.as_str()) {
                    Some(&v) => values.push(v),
                    None => {
                        return Err(TinyLmError::PlanDatasetMismatch(format!(
                            "sample {} has no plan entry",
                            sample.id
                        )))
                    }
                }
            }
            Ok(Some(values))
        }
        TrainMode::UalPpl { alpha, v_t } => {
            if !(alpha.is_finite() && v_t.is_finite() && 0.0 < *alpha && alpha < v_t && *v_t < 1.0)
            {
                return Err(TinyLmError::InvalidHyper(format!(
                    "perplexity smoothing needs 0 < alpha < v_t < 1, got alpha={alpha} v_t={v_t}"
                )));
            }
            Ok(None)
        }
    }
}

/// Runs the full loop: initializes parameters from `config.seed`, trains for
/// `epochs` passes (bounded by `max_steps`), and streams one metrics line per
/// step into `metrics_out` when given, flushing after each line.
pub fn train(
    dataset: &[Sample],
    mode: &TrainMode,
    hyper: &TrainHyper,
    config: &ModelConfig,
    mut metrics_out: Option<&mut dyn Write>,
) -> Result<TrainResult, TinyLmError> {
    config.validate()?;
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(TinyLmError::EmptyDataset);
    }

    let rows: Vec<EncodedRow> = dataset
        .iter()
        .map(|s| encode_sample(s, config.context_length))
        .collect();
    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    let fixed = static_smoothing(dataset, mode)?;
    let smoothing = fixed.unwrap_or_else(|| vec![0.0; dataset.len()]);
    let mut ppl_state = PplState::with_default_decay();

    let mut params = Parameters::<f32>::init(config);
    let mut opt = AdamState::new(config);

    // The shuffle stream is distinct from the init stream (stream 0), so the
    // same seed can drive both without correlating them.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let steps_per_epoch = dataset.len().div_ceil(hyper.batch_size);
    let planned = hyper
        .max_steps
        .unwrap_or(usize::MAX)
        .min(hyper.epochs.saturating_mul(steps_per_epoch));

    let mut records: Vec<MetricsRecord> = Vec::with_capacity(planned);
    let mut step: u64 = 0;

    'epochs: for _ in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut shuffle_rng);

        for chunk in order.chunks(hyper.batch_size) {
            if records.len() >= planned {
                break 'epochs;
            }
            let started = Instant::now();
            let mut batch = make_batch::<f32>(&rows, &ids, &smoothing, chunk);

            let (loss, grads) = match mode {
                TrainMode::UalPpl { alpha, v_t } => {
                    // One forward pass serves both the perplexity probe and
                    // the loss: smoothing values for this batch come from the
                    // unsmoothed per-sample likelihoods of the same logits.
                    let (logits, cache) =
                        run_forward(&params, &batch.tokens, batch.batch, batch.seq, hyper.parallel)?;
                    let nll = per_sample_nll(&logits, &batch)?;
                    for (b, sample_nll) in nll.iter().enumerate() {
                        let ppl = sample_nll.exp();
                        let v = ppl_smoothing(ppl, &mut ppl_state, *alpha, *v_t).map_err(|e| {
                            TinyLmError::TrainingDiverged {
                                step: step + 1,
                                detail: format!("sample {}: {e}", batch.ids[b]),
                            }
                        })?;
                        batch.smoothing[b] = v as f32;
                    }
                    let (loss, d_logits) = loss_grad_from_logits(&logits, &batch)?;
                    let grads = backward(&params, &batch.tokens, &cache, &d_logits, hyper.parallel);
                    (loss, grads)
                }
                _ => loss_and_grad(&params, &batch, hyper.parallel)?,
            };

            if !loss.is_finite() {
                return Err(TinyLmError::TrainingDiverged {
                    step: step + 1,
                    detail: format!("{} loss is {loss}", mode.name()),
                });
            }

            let mut grads = grads;
            clip_global_norm(&mut grads, hyper.clip_norm);
            let lr = warmup_lr(hyper.learning_rate, hyper.warmup_steps, step);
            adam_step(&mut params, &grads, &mut opt, lr);
            step += 1;

            let mean_v = batch.smoothing.iter().map(|&v| v as f64).sum::<f64>()
                / batch.smoothing.len() as f64;
            let record = MetricsRecord {
                step,
                loss: loss as f64,
                mean_v,
                lr,
                elapsed_ms: if hyper.deterministic {
                    0
                } else {
                    started.elapsed().as_millis() as u64
                },
            };
            if let Some(out) = metrics_out.as_deref_mut() {
                serde_json::to_writer(&mut *out, &record)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
                out.write_all(b"\n")?;
                out.flush()?;
            }
            records.push(record);
        }
    }

    let final_loss = records.last().map(|r| r.loss).expect("at least one step ran");
    Ok(TrainResult {
        params,
        steps: step,
        records,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ual_core::{build_plan, PlanEntry};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: crate::tokenizer::VOCAB_SIZE,
            context_length: 24,
            embed_dim: 16,
            num_layers: 1,
            num_heads: 2,
            mlp_ratio: 2,
            seed: 5,
        }
    }

    fn tiny_dataset() -> Vec<Sample> {
        (0..6)
            .map(|i| Sample {
                id: format!("s{i}"),
                instruction: format!("{i}+{i}="),
                response: format!("{}", 2 * i),
                uncertainty: Some(0.5),
            })
            .collect()
    }

    fn tiny_hyper(steps: usize) -> TrainHyper {
        TrainHyper {
            learning_rate: 1e-3,
            warmup_steps: 4,
            batch_size: 3,
            epochs: 100,
            max_steps: Some(steps),
            clip_norm: 1.0,
            deterministic: true,
            parallel: false,
        }
    }

    #[test]
    fn warmup_then_constant_schedule() {
        let result = train(
            &tiny_dataset(),
            &TrainMode::Sft,
            &tiny_hyper(6),
            &tiny_config(),
            None,
        )
        .unwrap();
        let lrs: Vec<f64> = result.records.iter().map(|r| r.lr).collect();
        let expected = [0.25e-3, 0.5e-3, 0.75e-3, 1e-3, 1e-3, 1e-3];
        assert_eq!(lrs.len(), expected.len());
        for (got, want) in lrs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-18, "lr {got} vs {want}");
        }
    }

    #[test]
    fn sft_and_zero_smoothing_are_bitwise_identical() {
        let data = tiny_dataset();
        let sft = train(&data, &TrainMode::Sft, &tiny_hyper(4), &tiny_config(), None).unwrap();
        let ls = train(
            &data,
            &TrainMode::LabelSmoothing { alpha: 0.0 },
            &tiny_hyper(4),
            &tiny_config(),
            None,
        )
        .unwrap();
        assert_eq!(sft.records, ls.records);
        assert_eq!(sft.params, ls.params);
    }

    #[test]
    fn plan_mode_uses_per_sample_values() {
        let data = tiny_dataset();
        let plan = build_plan(&data, 0.1, 0.99).unwrap();
        let result = train(
            &data,
            &TrainMode::Ual { plan },
            &tiny_hyper(2),
            &tiny_config(),
            None,
        )
        .unwrap();
        // Every sample has u = 0.5, so every batch's mean smoothing is the
        // target mean exactly.
        for record in &result.records {
            assert!((record.mean_v - 0.1).abs() < 1e-7, "mean_v {}", record.mean_v);
        }
    }

    #[test]
    fn plan_missing_a_sample_is_rejected() {
        let data = tiny_dataset();
        let mut plan = build_plan(&data, 0.1, 0.99).unwrap();
        plan.entries.retain(|e: &PlanEntry| e.sample_id != "s3");
        let err = train(
            &data,
            &TrainMode::Ual { plan },
            &tiny_hyper(2),
            &tiny_config(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, TinyLmError::PlanDatasetMismatch(msg) if msg.contains("s3")));
    }

    #[test]
    fn ppl_mode_seeds_first_batch_at_alpha() {
        let data = tiny_dataset();
        let mut hyper = tiny_hyper(3);
        hyper.batch_size = 2;
        let result = train(
            &data,
            &TrainMode::UalPpl { alpha: 0.1, v_t: 0.99 },
            &hyper,
            &tiny_config(),
            None,
        )
        .unwrap();
        // The first sample seen initializes the running mean, so its value is
        // exactly alpha; later samples move with their perplexity ratio.
        assert!(result.records[0].mean_v > 0.0);
        for record in &result.records {
            assert!(record.mean_v <= 0.99 + 1e-12);
        }
    }

    #[test]
    fn bad_hyperparameters_are_rejected_up_front() {
        let data = tiny_dataset();
        let config = tiny_config();
        let mut h = tiny_hyper(1);
        h.batch_size = 0;
        assert!(matches!(
            train(&data, &TrainMode::Sft, &h, &config, None),
            Err(TinyLmError::InvalidHyper(_))
        ));
        let mut h = tiny_hyper(1);
        h.learning_rate = f64::NAN;
        assert!(matches!(
            train(&data, &TrainMode::Sft, &h, &config, None),
            Err(TinyLmError::InvalidHyper(_))
        ));
        assert!(matches!(
            train(
                &data,
                &TrainMode::LabelSmoothing { alpha: 1.0 },
                &tiny_hyper(1),
                &config,
                None
            ),
            Err(TinyLmError::InvalidHyper(_))
        ));
        assert!(matches!(
            train(
                &data,
                &TrainMode::UalPpl { alpha: 0.5, v_t: 0.3 },
                &tiny_hyper(1),
                &config,
                None
            ),
            Err(TinyLmError::InvalidHyper(_))
        ));
        assert!(matches!(
            train(&[], &TrainMode::Sft, &tiny_hyper(1), &config, None),
            Err(TinyLmError::EmptyDataset)
        ));
    }

    #[test]
    fn max_steps_caps_the_run() {
        let result = train(
            &tiny_dataset(),
            &TrainMode::Sft,
            &tiny_hyper(3),
            &tiny_config(),
            None,
        )
        .unwrap();
        assert_eq!(result.steps, 3);
        assert_eq!(result.records.len(), 3);
        assert_eq!(result.records.last().unwrap().step, 3);
    }

    #[test]
    fn metrics_stream_matches_returned_records() {
        let mut buf: Vec<u8> = Vec::new();
        let result = train(
            &tiny_dataset(),
            &TrainMode::Sft,
            &tiny_hyper(2),
            &tiny_config(),
            Some(&mut buf),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<MetricsRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, result.records);
        assert!(result.records.iter().all(|r| r.elapsed_ms == 0));
    }
}
