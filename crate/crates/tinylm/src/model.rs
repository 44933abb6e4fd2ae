//! Forward and backward passes of the decoder-only transformer.
//!
//! Architecture: learned token + absolute positional embeddings, then
//! pre-norm blocks (layer-norm → causal multi-head attention → residual;
//! layer-norm → GELU MLP → residual), a final layer-norm whose output is the
//! "penultimate feature" tap, and an untied output projection.
//!
//! Gradients are exact: the backward pass is hand-derived per operation and
//! is checked against central finite differences in the test suite. All
//! buffers are row-major with rows indexed `b * seq + t`.
//!
//! Padding: a `PAD` input token is excluded from every attention softmax (as
//! if its score were −∞) and its own query row is skipped entirely. With
//! right-padded batches no real position ever reads a pad position, so pad
//! rows carry no gradient.

use rayon::prelude::*;
use ual_loss::{smoothed_token_loss, smoothed_token_loss_grad_into, LossError, Scalar};

use crate::config::ModelConfig;
use crate::data::Batch;
use crate::error::TinyLmError;
use crate::params::Parameters;
use crate::tensor::{acc_a_bt, acc_at_b, matmul_into};
use crate::tokenizer::PAD;

/// Layer-norm variance guard.
const LN_EPS: f64 = 1e-5;

/// Batches with at least this many sequences may fan attention out across
/// threads (each sequence is one unit of work, bitwise independent).
const PAR_MIN_SEQS: usize = 2;

pub struct ForwardOutput<F> {
    /// batch × seq × vocab logits.
    pub logits: Vec<F>,
    /// batch × seq × embed_dim output of the final layer-norm, when asked.
    pub features: Option<Vec<F>>,
}

pub(crate) struct LayerCache<F> {
    ln1_inv: Vec<F>,
    x_hat1: Vec<F>,
    h1: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// batch × heads × seq × seq attention weights; zero where masked.
    attn: Vec<F>,
    ctx: Vec<F>,
    ln2_inv: Vec<F>,
    x_hat2: Vec<F>,
    h2: Vec<F>,
    m1: Vec<F>,
    gelu_out: Vec<F>,
}

pub(crate) struct ForwardCache<F> {
    layers: Vec<LayerCache<F>>,
    fin_inv: Vec<F>,
    fin_x_hat: Vec<F>,
    pub(crate) features: Vec<F>,
    is_pad: Vec<bool>,
    batch: usize,
    seq: usize,
}

// ---------------------------------------------------------------------------
// Elementwise pieces
// ---------------------------------------------------------------------------

fn gelu_tanh<F: Scalar>(x: F) -> F {
    let half = F::from_f64_lossy(0.5);
    let c = F::from_f64_lossy((2.0 / std::f64::consts::PI).sqrt());
    let a = F::from_f64_lossy(0.044715);
    let inner = c * (x + a * x * x * x);
    half * x * (F::one() + inner.tanh())
}

fn gelu_tanh_prime<F: Scalar>(x: F) -> F {
    let half = F::from_f64_lossy(0.5);
    let c = F::from_f64_lossy((2.0 / std::f64::consts::PI).sqrt());
    let a = F::from_f64_lossy(0.044715);
    let three = F::from_f64_lossy(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x)
}

/// y = gain ⊙ (x − mean)/std + bias per row; stores 1/std and the normalized
/// rows for the backward pass.
fn layer_norm_forward<F: Scalar>(
    x: &[F],
    gain: &[F],
    bias: &[F],
    d: usize,
    inv_out: &mut [F],
    x_hat_out: &mut [F],
    y_out: &mut [F],
) {
    let eps = F::from_f64_lossy(LN_EPS);
    let d_f = F::from_usize(d).unwrap();
    for (row, x_row) in x.chunks(d).enumerate() {
        let mut mean = F::zero();
        for &value in x_row {
            mean += value;
        }
        mean = mean / d_f;
        let mut var = F::zero();
        for &value in x_row {
            let centered = value - mean;
            var += centered * centered;
        }
        var = var / d_f;
        let inv = (var + eps).sqrt().recip();
        inv_out[row] = inv;
        let x_hat_row = &mut x_hat_out[row * d..(row + 1) * d];
        let y_row = &mut y_out[row * d..(row + 1) * d];
        for j in 0..d {
            let x_hat = (x_row[j] - mean) * inv;
            x_hat_row[j] = x_hat;
            y_row[j] = gain[j] * x_hat + bias[j];
        }
    }
}

/// Accumulates d_gain, d_bias, and dx for `layer_norm_forward`.
fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    x_hat: &[F],
    inv: &[F],
    gain: &[F],
    d: usize,
    d_gain: &mut [F],
    d_bias: &mut [F],
    dx_acc: &mut [F],
) {
    let d_f = F::from_usize(d).unwrap();
    let rows = inv.len();
    let mut d_x_hat = vec![F::zero(); d];
    for row in 0..rows {
        let dy_row = &dy[row * d..(row + 1) * d];
        let x_hat_row = &x_hat[row * d..(row + 1) * d];
        let mut mean_dxh = F::zero();
        let mut mean_dxh_xh = F::zero();
        for j in 0..d {
            let g = dy_row[j] * gain[j];
            d_x_hat[j] = g;
            mean_dxh += g;
            mean_dxh_xh += g * x_hat_row[j];
            d_gain[j] += dy_row[j] * x_hat_row[j];
            d_bias[j] += dy_row[j];
        }
        mean_dxh = mean_dxh / d_f;
        mean_dxh_xh = mean_dxh_xh / d_f;
        let dx_row = &mut dx_acc[row * d..(row + 1) * d];
        for j in 0..d {
            dx_row[j] += inv[row] * (d_x_hat[j] - mean_dxh - x_hat_row[j] * mean_dxh_xh);
        }
    }
}

fn add_inplace<F: Scalar>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn add_bias_rows<F: Scalar>(rows: &mut [F], bias: &[F]) {
    for row in rows.chunks_mut(bias.len()) {
        add_inplace(row, bias);
    }
}

/// Column sums of a rows×n matrix, accumulated into `acc` (bias gradients).
fn acc_col_sums<F: Scalar>(acc: &mut [F], matrix: &[F]) {
    for row in matrix.chunks(acc.len()) {
        add_inplace(acc, row);
    }
}

// ---------------------------------------------------------------------------
// Attention (one sequence at a time)
// ---------------------------------------------------------------------------

/// Causal multi-head attention over one sequence: fills the attention
/// weights (zero where masked) and the per-head context rows.
#[allow(clippy::too_many_arguments)]
fn attention_forward_seq<F: Scalar>(
    q: &[F],
    k: &[F],
    v: &[F],
    is_pad: &[bool],
    seq: usize,
    d: usize,
    heads: usize,
    attn: &mut [F],
    ctx: &mut [F],
) {
    let head_dim = d / heads;
    let scale = F::from_f64_lossy(1.0 / (head_dim as f64).sqrt());
    for h in 0..heads {
        let ho = h * head_dim;
        for t in 0..seq {
            if is_pad[t] {
                continue; // row stays zero; nothing downstream reads it
            }
            let attn_row = &mut attn[(h * seq + t) * seq..(h * seq + t + 1) * seq];
            let q_row = &q[t * d + ho..t * d + ho + head_dim];
            let mut max_score = F::neg_infinity();
            for j in 0..=t {
                if is_pad[j] {
                    continue;
                }
                let k_row = &k[j * d + ho..j * d + ho + head_dim];
                let mut dot = F::zero();
                for (&qx, &kx) in q_row.iter().zip(k_row) {
                    dot += qx * kx;
                }
                let score = dot * scale;
                attn_row[j] = score;
                if score > max_score {
                    max_score = score;
                }
            }
            let mut denom = F::zero();
            for j in 0..=t {
                if is_pad[j] {
                    continue;
                }
                let w = (attn_row[j] - max_score).exp();
                attn_row[j] = w;
                denom += w;
            }
            let ctx_row = &mut ctx[t * d + ho..t * d + ho + head_dim];
            for j in 0..=t {
                if is_pad[j] {
                    continue;
                }
                let w = attn_row[j] / denom;
                attn_row[j] = w;
                let v_row = &v[j * d + ho..j * d + ho + head_dim];
                for (c, &vx) in ctx_row.iter_mut().zip(v_row) {
                    *c += w * vx;
                }
            }
        }
    }
}

/// Backward of `attention_forward_seq`: accumulates dq, dk, dv from d_ctx
/// using the stored weights.
#[allow(clippy::too_many_arguments)]
fn attention_backward_seq<F: Scalar>(
    attn: &[F],
    q: &[F],
    k: &[F],
    v: &[F],
    d_ctx: &[F],
    is_pad: &[bool],
    seq: usize,
    d: usize,
    heads: usize,
    dq: &mut [F],
    dk: &mut [F],
    dv: &mut [F],
) {
    let head_dim = d / heads;
    let scale = F::from_f64_lossy(1.0 / (head_dim as f64).sqrt());
    let mut d_weights = vec![F::zero(); seq];
    for h in 0..heads {
        let ho = h * head_dim;
        for t in 0..seq {
            if is_pad[t] {
                continue;
            }
            let attn_row = &attn[(h * seq + t) * seq..(h * seq + t + 1) * seq];
            let d_ctx_row = &d_ctx[t * d + ho..t * d + ho + head_dim];
            // dv and the raw weight gradient.
            let mut weighted_sum = F::zero();
            for j in 0..=t {
                if is_pad[j] {
                    continue;
                }
                let v_row = &v[j * d + ho..j * d + ho + head_dim];
                let mut dot = F::zero();
                for (&g, &vx) in d_ctx_row.iter().zip(v_row) {
                    dot += g * vx;
                }
                d_weights[j] = dot;
                weighted_sum += attn_row[j] * dot;
                let dv_row = &mut dv[j * d + ho..j * d + ho + head_dim];
                for (dvx, &g) in dv_row.iter_mut().zip(d_ctx_row) {
                    *dvx += attn_row[j] * g;
                }
            }
            // Softmax jacobian, then dq/dk through the scaled dot products.
            let q_row = &q[t * d + ho..t * d + ho + head_dim];
            for j in 0..=t {
                if is_pad[j] {
                    continue;
                }
                let ds = attn_row[j] * (d_weights[j] - weighted_sum) * scale;
                let k_row = &k[j * d + ho..j * d + ho + head_dim];
                let dq_row = &mut dq[t * d + ho..t * d + ho + head_dim];
                for (dqx, &kx) in dq_row.iter_mut().zip(k_row) {
                    *dqx += ds * kx;
                }
                let dk_row = &mut dk[j * d + ho..j * d + ho + head_dim];
                for (dkx, &qx) in dk_row.iter_mut().zip(q_row) {
                    *dkx += ds * qx;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Full passes
// ---------------------------------------------------------------------------

fn validate_tokens(
    config: &ModelConfig,
    tokens: &[usize],
    batch: usize,
    seq: usize,
) -> Result<(), TinyLmError> {
    if batch == 0 || seq == 0 || seq > config.context_length {
        return Err(TinyLmError::ShapeMismatch(format!(
            "batch {batch} × seq {seq} is outside 1..={}",
            config.context_length
        )));
    }
    if tokens.len() != batch * seq {
        return Err(TinyLmError::ShapeMismatch(format!(
            "token buffer has {} ids, expected {batch}×{seq}",
            tokens.len()
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&id| id >= config.vocab_size) {
        return Err(TinyLmError::ShapeMismatch(format!(
            "token id {bad} outside vocab of {}",
            config.vocab_size
        )));
    }
    Ok(())
}

pub(crate) fn run_forward<F: Scalar>(
    params: &Parameters<F>,
    tokens: &[usize],
    batch: usize,
    seq: usize,
    parallel: bool,
) -> Result<(Vec<F>, ForwardCache<F>), TinyLmError> {
    let config = &params.config;
    validate_tokens(config, tokens, batch, seq)?;
    let d = config.embed_dim;
    let m = config.mlp_dim();
    let heads = config.num_heads;
    let vocab = config.vocab_size;
    let rows = batch * seq;
    let fan_out = parallel && batch >= PAR_MIN_SEQS;

    let is_pad: Vec<bool> = tokens.iter().map(|&id| id == PAD).collect();

    // Embedding sum.
    let mut x = vec![F::zero(); rows * d];
    for (r, &id) in tokens.iter().enumerate() {
        let t = r % seq;
        let x_row = &mut x[r * d..(r + 1) * d];
        let tok_row = &params.token_embedding[id * d..(id + 1) * d];
        let pos_row = &params.positional_embedding[t * d..(t + 1) * d];
        for j in 0..d {
            x_row[j] = tok_row[j] + pos_row[j];
        }
    }

    let mut layers = Vec::with_capacity(config.num_layers);
    let mut scratch = vec![F::zero(); rows * d];
    for layer in &params.layers {
        let mut cache = LayerCache {
            ln1_inv: vec![F::zero(); rows],
            x_hat1: vec![F::zero(); rows * d],
            h1: vec![F::zero(); rows * d],
            q: vec![F::zero(); rows * d],
            k: vec![F::zero(); rows * d],
            v: vec![F::zero(); rows * d],
            attn: vec![F::zero(); batch * heads * seq * seq],
            ctx: vec![F::zero(); rows * d],
            ln2_inv: vec![F::zero(); rows],
            x_hat2: vec![F::zero(); rows * d],
            h2: vec![F::zero(); rows * d],
            m1: vec![F::zero(); rows * m],
            gelu_out: vec![F::zero(); rows * m],
        };

        layer_norm_forward(
            &x,
            &layer.ln1_gain,
            &layer.ln1_bias,
            d,
            &mut cache.ln1_inv,
            &mut cache.x_hat1,
            &mut cache.h1,
        );
        matmul_into(&mut cache.q, &cache.h1, &layer.w_query, rows, d, d, parallel);
        matmul_into(&mut cache.k, &cache.h1, &layer.w_key, rows, d, d, parallel);
        matmul_into(&mut cache.v, &cache.h1, &layer.w_value, rows, d, d, parallel);

        let run_one = |b: usize, ctx_chunk: &mut [F], attn_chunk: &mut [F]| {
            attention_forward_seq(
                &cache.q[b * seq * d..(b + 1) * seq * d],
                &cache.k[b * seq * d..(b + 1) * seq * d],
                &cache.v[b * seq * d..(b + 1) * seq * d],
                &is_pad[b * seq..(b + 1) * seq],
                seq,
                d,
                heads,
                attn_chunk,
                ctx_chunk,
            );
        };
        if fan_out {
            cache
                .ctx
                .par_chunks_mut(seq * d)
                .zip(cache.attn.par_chunks_mut(heads * seq * seq))
                .enumerate()
                .for_each(|(b, (ctx_chunk, attn_chunk))| run_one(b, ctx_chunk, attn_chunk));
        } else {
            for (b, (ctx_chunk, attn_chunk)) in cache
                .ctx
                .chunks_mut(seq * d)
                .zip(cache.attn.chunks_mut(heads * seq * seq))
                .enumerate()
            {
                run_one(b, ctx_chunk, attn_chunk);
            }
        }

        matmul_into(&mut scratch, &cache.ctx, &layer.w_attn_out, rows, d, d, parallel);
        add_inplace(&mut x, &scratch);

        layer_norm_forward(
            &x,
            &layer.ln2_gain,
            &layer.ln2_bias,
            d,
            &mut cache.ln2_inv,
            &mut cache.x_hat2,
            &mut cache.h2,
        );
        matmul_into(&mut cache.m1, &cache.h2, &layer.w_mlp_in, rows, d, m, parallel);
        add_bias_rows(&mut cache.m1, &layer.b_mlp_in);
        for (g, &pre) in cache.gelu_out.iter_mut().zip(&cache.m1) {
            *g = gelu_tanh(pre);
        }
        matmul_into(&mut scratch, &cache.gelu_out, &layer.w_mlp_out, rows, m, d, parallel);
        add_bias_rows(&mut scratch, &layer.b_mlp_out);
        add_inplace(&mut x, &scratch);

        layers.push(cache);
    }

    let mut cache = ForwardCache {
        layers,
        fin_inv: vec![F::zero(); rows],
        fin_x_hat: vec![F::zero(); rows * d],
        features: vec![F::zero(); rows * d],
        is_pad,
        batch,
        seq,
    };
    layer_norm_forward(
        &x,
        &params.final_ln_gain,
        &params.final_ln_bias,
        d,
        &mut cache.fin_inv,
        &mut cache.fin_x_hat,
        &mut cache.features,
    );
    let mut logits = vec![F::zero(); rows * vocab];
    matmul_into(&mut logits, &cache.features, &params.w_output, rows, d, vocab, parallel);
    Ok((logits, cache))
}

/// Logits (and optionally penultimate features) for a token matrix.
pub fn forward<F: Scalar>(
    params: &Parameters<F>,
    tokens: &[usize],
    batch: usize,
    seq: usize,
    want_features: bool,
    parallel: bool,
) -> Result<ForwardOutput<F>, TinyLmError> {
    let (logits, cache) = run_forward(params, tokens, batch, seq, parallel)?;
    Ok(ForwardOutput {
        logits,
        features: want_features.then_some(cache.features),
    })
}

pub(crate) fn backward<F: Scalar>(
    params: &Parameters<F>,
    tokens: &[usize],
    cache: &ForwardCache<F>,
    d_logits: &[F],
    parallel: bool,
) -> Parameters<F> {
    let config = &params.config;
    let d = config.embed_dim;
    let m = config.mlp_dim();
    let heads = config.num_heads;
    let vocab = config.vocab_size;
    let (batch, seq) = (cache.batch, cache.seq);
    let rows = batch * seq;
    let fan_out = parallel && batch >= PAR_MIN_SEQS;

    let mut grads = Parameters::<F>::zeros(config);

    // Output projection and final layer-norm.
    acc_at_b(&mut grads.w_output, &cache.features, d_logits, rows, d, vocab, parallel);
    let mut d_feat = vec![F::zero(); rows * d];
    acc_a_bt(&mut d_feat, d_logits, &params.w_output, rows, vocab, d, parallel);
    let mut dx = vec![F::zero(); rows * d];
    layer_norm_backward(
        &d_feat,
        &cache.fin_x_hat,
        &cache.fin_inv,
        &params.final_ln_gain,
        d,
        &mut grads.final_ln_gain,
        &mut grads.final_ln_bias,
        &mut dx,
    );

    for (layer_index, layer) in params.layers.iter().enumerate().rev() {
        let lc = &cache.layers[layer_index];
        let lg = &mut grads.layers[layer_index];

        // MLP half: x_out = x_mid + W_out·gelu(W_in·h2 + b_in) + b_out.
        acc_col_sums(&mut lg.b_mlp_out, &dx);
        acc_at_b(&mut lg.w_mlp_out, &lc.gelu_out, &dx, rows, m, d, parallel);
        let mut d_m1 = vec![F::zero(); rows * m];
        acc_a_bt(&mut d_m1, &dx, &layer.w_mlp_out, rows, d, m, parallel);
        for (g, &pre) in d_m1.iter_mut().zip(&lc.m1) {
            *g *= gelu_tanh_prime(pre);
        }
        acc_col_sums(&mut lg.b_mlp_in, &d_m1);
        acc_at_b(&mut lg.w_mlp_in, &lc.h2, &d_m1, rows, d, m, parallel);
        let mut d_h2 = vec![F::zero(); rows * d];
        acc_a_bt(&mut d_h2, &d_m1, &layer.w_mlp_in, rows, m, d, parallel);
        // dx currently holds d(x_out); the residual passes it through to
        // x_mid, and the layer-norm path adds its share in place.
        layer_norm_backward(
            &d_h2,
            &lc.x_hat2,
            &lc.ln2_inv,
            &layer.ln2_gain,
            d,
            &mut lg.ln2_gain,
            &mut lg.ln2_bias,
            &mut dx,
        );

        // Attention half: x_mid = x_in + (ctx · W_attn_out).
        acc_at_b(&mut lg.w_attn_out, &lc.ctx, &dx, rows, d, d, parallel);
        let mut d_ctx = vec![F::zero(); rows * d];
        acc_a_bt(&mut d_ctx, &dx, &layer.w_attn_out, rows, d, d, parallel);

        let mut d_q = vec![F::zero(); rows * d];
        let mut d_k = vec![F::zero(); rows * d];
        let mut d_v = vec![F::zero(); rows * d];
        let run_one = |b: usize, dq_chunk: &mut [F], dk_chunk: &mut [F], dv_chunk: &mut [F]| {
            attention_backward_seq(
                &lc.attn[b * heads * seq * seq..(b + 1) * heads * seq * seq],
                &lc.q[b * seq * d..(b + 1) * seq * d],
                &lc.k[b * seq * d..(b + 1) * seq * d],
                &lc.v[b * seq * d..(b + 1) * seq * d],
                &d_ctx[b * seq * d..(b + 1) * seq * d],
                &cache.is_pad[b * seq..(b + 1) * seq],
                seq,
                d,
                heads,
                dq_chunk,
                dk_chunk,
                dv_chunk,
            );
        };
        if fan_out {
            d_q.par_chunks_mut(seq * d)
                .zip(d_k.par_chunks_mut(seq * d))
                .zip(d_v.par_chunks_mut(seq * d))
                .enumerate()
                .for_each(|(b, ((dq_chunk, dk_chunk), dv_chunk))| {
                    run_one(b, dq_chunk, dk_chunk, dv_chunk)
                });
        } else {
            for b in 0..batch {
                let (dq_chunk, dk_chunk, dv_chunk) = (
                    &mut d_q[b * seq * d..(b + 1) * seq * d],
                    &mut d_k[b * seq * d..(b + 1) * seq * d],
                    &mut d_v[b * seq * d..(b + 1) * seq * d],
                );
                // Split borrows: chunks are disjoint by construction.
                run_one(b, dq_chunk, dk_chunk, dv_chunk);
            }
        }

        acc_at_b(&mut lg.w_query, &lc.h1, &d_q, rows, d, d, parallel);
        acc_at_b(&mut lg.w_key, &lc.h1, &d_k, rows, d, d, parallel);
        acc_at_b(&mut lg.w_value, &lc.h1, &d_v, rows, d, d, parallel);
        let mut d_h1 = vec![F::zero(); rows * d];
        acc_a_bt(&mut d_h1, &d_q, &layer.w_query, rows, d, d, parallel);
        acc_a_bt(&mut d_h1, &d_k, &layer.w_key, rows, d, d, parallel);
        acc_a_bt(&mut d_h1, &d_v, &layer.w_value, rows, d, d, parallel);
        layer_norm_backward(
            &d_h1,
            &lc.x_hat1,
            &lc.ln1_inv,
            &layer.ln1_gain,
            d,
            &mut lg.ln1_gain,
            &mut lg.ln1_bias,
            &mut dx,
        );
    }

    // Embedding scatter, sequential for fixed accumulation order.
    for (r, &id) in tokens.iter().enumerate() {
        let t = r % seq;
        let dx_row = &dx[r * d..(r + 1) * d];
        let tok_row = &mut grads.token_embedding[id * d..(id + 1) * d];
        for j in 0..d {
            tok_row[j] += dx_row[j];
        }
        let pos_row = &mut grads.positional_embedding[t * d..(t + 1) * d];
        for j in 0..d {
            pos_row[j] += dx_row[j];
        }
    }
    grads
}

/// Mean per-sample sequence loss and its gradient w.r.t. the logits.
pub(crate) fn loss_grad_from_logits<F: Scalar>(
    logits: &[F],
    batch: &Batch<F>,
) -> Result<(F, Vec<F>), LossError> {
    let vocab = logits.len() / (batch.batch * batch.seq);
    let mut d_logits = vec![F::zero(); logits.len()];
    let batch_f = F::from_usize(batch.batch).unwrap();
    let mut total = F::zero();
    for b in 0..batch.batch {
        let masked: Vec<usize> = (0..batch.seq)
            .filter(|&t| batch.mask[b * batch.seq + t])
            .collect();
        if masked.is_empty() {
            return Err(LossError::EmptyMask);
        }
        let count = F::from_usize(masked.len()).unwrap();
        let row_scale = (batch_f * count).recip();
        let mut sample_loss = F::zero();
        for t in masked {
            let r = b * batch.seq + t;
            let row = &logits[r * vocab..(r + 1) * vocab];
            let grad_row = &mut d_logits[r * vocab..(r + 1) * vocab];
            let token_loss = smoothed_token_loss_grad_into(
                row,
                batch.targets[r],
                batch.smoothing[b],
                grad_row,
            );
            sample_loss += token_loss;
            for g in grad_row.iter_mut() {
                *g *= row_scale;
            }
        }
        total += sample_loss / count;
    }
    Ok((total / batch_f, d_logits))
}

/// Per-sample mean negative log likelihood over masked positions, with no
/// smoothing — the quantity perplexity exponentiates.
pub(crate) fn per_sample_nll<F: Scalar>(logits: &[F], batch: &Batch<F>) -> Result<Vec<f64>, LossError> {
    let vocab = logits.len() / (batch.batch * batch.seq);
    let mut out = Vec::with_capacity(batch.batch);
    for b in 0..batch.batch {
        let mut total = 0.0f64;
        let mut count = 0usize;
        for t in 0..batch.seq {
            let r = b * batch.seq + t;
            if !batch.mask[r] {
                continue;
            }
            let row = &logits[r * vocab..(r + 1) * vocab];
            let nll = smoothed_token_loss(row, batch.targets[r], F::zero());
            total += nll.to_f64().expect("float converts");
            count += 1;
        }
        if count == 0 {
            return Err(LossError::EmptyMask);
        }
        out.push(total / count as f64);
    }
    Ok(out)
}

/// Loss over one batch and exact gradients for every parameter tensor.
pub fn loss_and_grad<F: Scalar>(
    params: &Parameters<F>,
    batch: &Batch<F>,
    parallel: bool,
) -> Result<(F, Parameters<F>), TinyLmError> {
    let (logits, cache) = run_forward(params, &batch.tokens, batch.batch, batch.seq, parallel)?;
    let (loss, d_logits) = loss_grad_from_logits(&logits, batch)?;
    let grads = backward(params, &batch.tokens, &cache, &d_logits, parallel);
    Ok((loss, grads))
}
