//! Sample encoding and batch assembly.
//!
//! A sample becomes the token sequence `[BOS] instruction response [EOS]`.
//! Inputs are that sequence minus its last token, targets are the sequence
//! shifted by one, and the loss mask selects exactly the positions whose
//! target is a response byte or the EOS — instruction tokens are context,
//! never supervision.
//!
//! When a sequence exceeds the context, the instruction is truncated from
//! its left first (the oldest context is the most expendable); only if the
//! response alone cannot fit is the response's tail cut.

use ual_core::Sample;
use ual_loss::Scalar;

use crate::tokenizer::{BOS, EOS, PAD};

/// One encoded sample, unpadded. `inputs`, `targets`, and `mask` share one
/// length in `1..=context_length`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRow {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub mask: Vec<bool>,
}

/// A right-padded training batch. Token and target matrices are
/// batch × seq, row-major; `smoothing` holds one value per sample.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    pub tokens: Vec<usize>,
    pub targets: Vec<usize>,
    pub mask: Vec<bool>,
    pub smoothing: Vec<F>,
    pub ids: Vec<String>,
    pub batch: usize,
    pub seq: usize,
}

/// Encodes one sample against a context budget.
pub fn encode_sample(sample: &Sample, context_length: usize) -> EncodedRow {
    let mut response = sample.response.as_bytes();
    let mut instruction = sample.instruction.as_bytes();

    // inputs length is (1 BOS + instruction + response + 1 EOS) - 1.
    let overflow = (1 + instruction.len() + response.len()).saturating_sub(context_length);
    instruction = &instruction[overflow.min(instruction.len())..];
    let response_budget = context_length - 1 - instruction.len();
    if response.len() > response_budget {
        response = &response[..response_budget];
    }

    let mut full = Vec::with_capacity(2 + instruction.len() + response.len());
    full.push(BOS);
    full.extend(instruction.iter().map(|&b| b as usize));
    full.extend(response.iter().map(|&b| b as usize));
    full.push(EOS);

    let len = full.len() - 1;
    debug_assert!(len <= context_length);
    let first_response_target = 1 + instruction.len();
    let inputs = full[..len].to_vec();
    let targets = full[1..].to_vec();
    let mask = (0..len).map(|t| t + 1 >= first_response_target).collect();
    EncodedRow {
        inputs,
        targets,
        mask,
    }
}

/// Assembles selected rows into a right-padded batch. The width is the
/// longest selected row, pad positions carry `PAD` in both matrices and are
/// masked out of the loss.
pub fn make_batch<F: Scalar>(
    rows: &[EncodedRow],
    ids: &[String],
    smoothing: &[f64],
    indices: &[usize],
) -> Batch<F> {
    assert!(!indices.is_empty(), "a batch needs at least one sample");
    assert_eq!(rows.len(), ids.len());
    assert_eq!(rows.len(), smoothing.len());
    let seq = indices.iter().map(|&i| rows[i].inputs.len()).max().unwrap();
    let batch = indices.len();
    let mut out = Batch {
        tokens: vec![PAD; batch * seq],
        targets: vec![PAD; batch * seq],
        mask: vec![false; batch * seq],
        smoothing: Vec::with_capacity(batch),
        ids: Vec::with_capacity(batch),
        batch,
        seq,
    };
    for (slot, &i) in indices.iter().enumerate() {
        let row = &rows[i];
        let v = smoothing[i];
        assert!((0.0..=1.0).contains(&v), "smoothing value {v} outside [0, 1]");
        let offset = slot * seq;
        out.tokens[offset..offset + row.inputs.len()].copy_from_slice(&row.inputs);
        out.targets[offset..offset + row.targets.len()].copy_from_slice(&row.targets);
        out.mask[offset..offset + row.mask.len()].copy_from_slice(&row.mask);
        out.smoothing.push(F::from_f64_lossy(v));
        out.ids.push(ids[i].clone());
    }
    out
}
