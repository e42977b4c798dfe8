//! Word-level single-layer LSTM language model with an explicit backward
//! pass, instance-weighted cross-entropy, and perplexity.
//!
//! Parameters live in one flat vector so that model differences, clipping,
//! noise, and the server optimizer all operate on plain `&[f64]`. Layout:
//!
//! | block      | shape              | notes                              |
//! |------------|--------------------|------------------------------------|
//! | embedding  | `V × E`            | row per token                      |
//! | gate W     | `4H × (E + H)`     | rows grouped input, forget, cell, output; columns `[x; h]` |
//! | gate b     | `4H`               | same grouping                      |
//! | output W   | `H × V`            |                                    |
//! | output b   | `V`                |                                    |
//!
//! Loss positions: for a sequence `x_0 … x_{L−1}` the model reads
//! `x_0 … x_{L−2}` and predicts `x_1 … x_{L−1}`. Targets equal to PAD or
//! BOS are not scored; EOS is.

mod checkpoint;
mod lstm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::data::SpecialTokens;
use crate::seed::Seed;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },
    #[error("sequence {index} has length {found}, expected {expected}")]
    BadSequenceLength { index: usize, found: usize, expected: usize },
    #[error("{weights} weights for {sequences} sequences")]
    WeightCount { weights: usize, sequences: usize },
    #[error("weights must be finite and nonnegative")]
    BadWeight,
    #[error("batch has no scored target tokens")]
    NoTargets,
    #[error("empty evaluation data")]
    EmptyData,
    #[error("parameter vector has {found} entries, expected {expected}")]
    ParamCount { expected: usize, found: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 2000,
            embed_dim: 64,
            hidden_dim: 128,
            seq_len: crate::data::SEQ_LEN,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size < 5 || self.embed_dim == 0 || self.hidden_dim == 0 || self.seq_len < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "need vocab_size >= 5, embed_dim >= 1, hidden_dim >= 1, seq_len >= 2; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `V·E + 4·(H·(E+H) + H) + H·V + V`.
    pub fn param_count(&self) -> usize {
        let (v, e, h) = (self.vocab_size, self.embed_dim, self.hidden_dim);
        v * e + 4 * (h * (e + h) + h) + h * v + v
    }

    pub fn specials(&self) -> SpecialTokens {
        SpecialTokens::for_vocab_size(self.vocab_size)
    }

    pub(crate) fn offsets(&self) -> Offsets {
        let (v, e, h) = (self.vocab_size, self.embed_dim, self.hidden_dim);
        let emb = 0;
        let w_gates = emb + v * e;
        let b_gates = w_gates + 4 * h * (e + h);
        let w_out = b_gates + 4 * h;
        let b_out = w_out + h * v;
        Offsets {
            emb,
            w_gates,
            b_gates,
            w_out,
            b_out,
            end: b_out + v,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub emb: usize,
    pub w_gates: usize,
    pub b_gates: usize,
    pub w_out: usize,
    pub b_out: usize,
    pub end: usize,
}

/// Model parameters `θ` as a flat vector (see the module docs for layout).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub values: Vec<f64>,
}

/// Gradient with the same layout as [`ModelParams::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self {
            config,
            values: vec![0.0; config.param_count()],
        })
    }

    pub fn from_values(config: ModelConfig, values: Vec<f64>) -> Result<Self, ModelError> {
        config.validate()?;
        if values.len() != config.param_count() {
            return Err(ModelError::ParamCount {
                expected: config.param_count(),
                found: values.len(),
            });
        }
        Ok(Self { config, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The forget-gate bias block.
    pub fn forget_bias(&self) -> &[f64] {
        let o = self.config.offsets();
        let h = self.config.hidden_dim;
        &self.values[o.b_gates + h..o.b_gates + 2 * h]
    }

    /// The output projection and bias blocks, `(H·V, V)`.
    pub fn output_blocks_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let o = self.config.offsets();
        let (head, b_out) = self.values[o.w_out..o.end].split_at_mut(o.b_out - o.w_out);
        (head, b_out)
    }
}

/// Uniform `(−s, s]` initialization with `s = 1/√H`; forget-gate bias set to 1.
pub fn init_params(config: ModelConfig, seed: Seed) -> Result<ModelParams, ModelError> {
    use rand::Rng;
    let mut params = ModelParams::zeros(config)?;
    let s = 1.0 / (config.hidden_dim as f64).sqrt();
    let mut rng = seed.rng();
    for v in params.values.iter_mut() {
        let u: f64 = rng.random();
        *v = s * (1.0 - 2.0 * u);
    }
    let o = config.offsets();
    let h = config.hidden_dim;
    params.values[o.b_gates + h..o.b_gates + 2 * h].fill(1.0);
    Ok(params)
}

/// Weighted mean next-token NLL in nats per scored token:
/// `Σ_x w(x)·NLL(x) / Σ_x w(x)·(scored targets in x)`.
pub fn forward_nll<S: AsRef<[u32]>>(params: &ModelParams, batch: &[S], weights: &[f64]) -> Result<f64, ModelError> {
    let sums = lstm::run(params, batch, weights, false)?;
    if sums.weight == 0.0 {
        return Err(ModelError::NoTargets);
    }
    Ok(sums.nll / sums.weight)
}

/// Loss and its exact gradient.
pub fn loss_and_grad<S: AsRef<[u32]>>(
    params: &ModelParams,
    batch: &[S],
    weights: &[f64],
) -> Result<(f64, Gradients), ModelError> {
    let sums = lstm::run(params, batch, weights, true)?;
    let grad = sums.grad.expect("gradient requested");
    Ok((sums.nll / sums.weight, Gradients(grad)))
}

pub fn grad<S: AsRef<[u32]>>(params: &ModelParams, batch: &[S], weights: &[f64]) -> Result<Gradients, ModelError> {
    loss_and_grad(params, batch, weights).map(|(_, g)| g)
}

const EVAL_CHUNK: usize = 256;

/// `exp` of the mean NLL over all scored target tokens in `data`.
pub fn perplexity<S: AsRef<[u32]>>(params: &ModelParams, data: &[S]) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let (mut nll, mut count) = (0.0, 0.0);
    for chunk in data.chunks(EVAL_CHUNK) {
        let ones = vec![1.0; chunk.len()];
        let sums = lstm::run(params, chunk, &ones, false)?;
        nll += sums.nll;
        count += sums.weight;
    }
    if count == 0.0 {
        return Err(ModelError::NoTargets);
    }
    Ok((nll / count).exp())
}
