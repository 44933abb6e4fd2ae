//! A small decoder-only byte-level language model with hand-written forward
//! and backward passes, built for experiments where every step must be
//! reproducible down to the bit.
//!
//! The pieces:
//!
//! - [`tokenizer`]: bytes plus begin/end/pad markers, vocabulary of 259.
//! - [`config::ModelConfig`] / [`params::Parameters`]: shapes and weights,
//!   with a canonical named-tensor order shared by init, the optimizer, and
//!   the checkpoint format.
//! - [`model`]: pre-norm transformer blocks (causal attention, GELU MLP),
//!   exact analytic gradients, and a loss that mixes the one-hot target with
//!   a uniform distribution by a per-sample weight.
//! - [`adam::adam_step`]: Adam with bias correction and global-norm clipping.
//! - [`train::train`]: shuffle/batch/update loop with per-step JSON metrics
//!   and four smoothing policies, from plain cross-entropy to per-sample
//!   weights driven by a smoothing plan or by online perplexity.
//! - [`eval::evaluate_ppl`]: held-out perplexity, one sequence at a time.
//! - [`checkpoint`]: self-describing binary snapshots that round-trip
//!   bit-exactly.
//!
//! Threading never changes results: parallel kernels partition work by
//! output row and keep every reduction sequential, so `parallel: true` and
//! `false` agree bitwise.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod params;
mod tensor;
pub mod tokenizer;
pub mod train;

pub use adam::{adam_step, clip_global_norm, global_grad_norm, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use data::{encode_sample, make_batch, Batch, EncodedRow};
pub use error::TinyLmError;
pub use eval::{evaluate_ppl, PplReport};
pub use model::{forward, loss_and_grad, ForwardOutput};
pub use params::Parameters;
pub use train::{train, MetricsRecord, TrainHyper, TrainMode, TrainResult};
