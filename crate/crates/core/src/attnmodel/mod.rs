//! Single-block multi-head self-attention classifier with hand-written
//! backpropagation in double precision.
//!
//! Token embeddings plus fixed sinusoidal positions feed one multi-head
//! attention block (optionally wrapped in a residual connection and layer
//! normalisation), followed by masked mean pooling, dropout, a ReLU dense
//! layer, dropout and a sigmoid output unit.

mod network;
mod summary;
mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::TokenSequence;
use crate::error::{Error, Result};
use crate::seed;

pub use summary::{attention_summary, summarize_tensors};
pub use train::{train, TrainConfig, TrainReport};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_hidden: usize,
    pub dropout: f64,
    /// Wrap the attention block in `LayerNorm(x + Attention(x))`.
    pub residual_norm: bool,
    pub layer_norm_eps: f64,
}

impl AttentionConfig {
    pub fn new(vocab_size: usize, max_len: usize) -> Self {
        AttentionConfig {
            vocab_size,
            max_len,
            d_model: 36,
            n_heads: 6,
            d_hidden: 64,
            dropout: 0.1,
            residual_norm: true,
            layer_norm_eps: 1e-6,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.vocab_size == 0 || self.max_len == 0 || self.d_model == 0 || self.d_hidden == 0 {
            return bad("attention model dimensions must be positive".into());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.layer_norm_eps > 0.0) {
            return bad("layer_norm_eps must be positive".into());
        }
        Ok(())
    }
}

/// Trainable tensors, stored row-major; projections map `x · W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub embedding: Vec<f64>,
    pub w_q: Vec<f64>,
    pub b_q: Vec<f64>,
    pub w_k: Vec<f64>,
    pub b_k: Vec<f64>,
    pub w_v: Vec<f64>,
    pub b_v: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: Vec<f64>,
    pub ln_gamma: Vec<f64>,
    pub ln_beta: Vec<f64>,
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
}

impl Params {
    pub fn shapes(cfg: &AttentionConfig) -> Vec<(&'static str, Vec<usize>)> {
        let (v, d, f) = (cfg.vocab_size, cfg.d_model, cfg.d_hidden);
        vec![
            ("embedding", vec![v, d]),
            ("w_q", vec![d, d]),
            ("b_q", vec![d]),
            ("w_k", vec![d, d]),
            ("b_k", vec![d]),
            ("w_v", vec![d, d]),
            ("b_v", vec![d]),
            ("w_o", vec![d, d]),
            ("b_o", vec![d]),
            ("ln_gamma", vec![d]),
            ("ln_beta", vec![d]),
            ("w_hidden", vec![d, f]),
            ("b_hidden", vec![f]),
            ("w_out", vec![f]),
            ("b_out", vec![1]),
        ]
    }

    pub fn zeros(cfg: &AttentionConfig) -> Self {
        let z = |n: usize| vec![0.0; n];
        let (v, d, f) = (cfg.vocab_size, cfg.d_model, cfg.d_hidden);
        Params {
            embedding: z(v * d),
            w_q: z(d * d),
            b_q: z(d),
            w_k: z(d * d),
            b_k: z(d),
            w_v: z(d * d),
            b_v: z(d),
            w_o: z(d * d),
            b_o: z(d),
            ln_gamma: z(d),
            ln_beta: z(d),
            w_hidden: z(d * f),
            b_hidden: z(f),
            w_out: z(f),
            b_out: z(1),
        }
    }

    /// Uniform `±1/√fan_in` weights, zero biases, unit layer-norm gain.
    /// Embedding rows are looked up one-hot, so their fan-in is one.
    pub fn init(cfg: &AttentionConfig, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut p = Params::zeros(cfg);
        let mut fill = |t: &mut Vec<f64>, fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            t.iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
        };
        let (d, f) = (cfg.d_model, cfg.d_hidden);
        fill(&mut p.embedding, 1);
        fill(&mut p.w_q, d);
        fill(&mut p.w_k, d);
        fill(&mut p.w_v, d);
        fill(&mut p.w_o, d);
        fill(&mut p.w_hidden, d);
        fill(&mut p.w_out, f);
        p.ln_gamma.iter_mut().for_each(|g| *g = 1.0);
        p
    }

    pub fn tensors(&self) -> [(&'static str, &Vec<f64>); 15] {
        [
            ("embedding", &self.embedding),
            ("w_q", &self.w_q),
            ("b_q", &self.b_q),
            ("w_k", &self.w_k),
            ("b_k", &self.b_k),
            ("w_v", &self.w_v),
            ("b_v", &self.b_v),
            ("w_o", &self.w_o),
            ("b_o", &self.b_o),
            ("ln_gamma", &self.ln_gamma),
            ("ln_beta", &self.ln_beta),
            ("w_hidden", &self.w_hidden),
            ("b_hidden", &self.b_hidden),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 15] {
        [
            ("embedding", &mut self.embedding),
            ("w_q", &mut self.w_q),
            ("b_q", &mut self.b_q),
            ("w_k", &mut self.w_k),
            ("b_k", &mut self.b_k),
            ("w_v", &mut self.w_v),
            ("b_v", &mut self.b_v),
            ("w_o", &mut self.w_o),
            ("b_o", &mut self.b_o),
            ("ln_gamma", &mut self.ln_gamma),
            ("ln_beta", &mut self.ln_beta),
            ("w_hidden", &mut self.w_hidden),
            ("b_hidden", &mut self.b_hidden),
            ("w_out", &mut self.w_out),
            ("b_out", &mut self.b_out),
        ]
    }

    pub fn add_assign(&mut self, other: &Params) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self, cfg: &AttentionConfig) -> Result<()> {
        for ((name, t), (_, shape)) in self.tensors().into_iter().zip(Params::shapes(cfg)) {
            let expected: usize = shape.iter().product();
            if t.len() != expected {
                return Err(Error::Config(format!(
                    "tensor {name} has {} values, expected {expected}",
                    t.len()
                )));
            }
        }
        Ok(())
    }
}

/// Post-softmax attention weights for one sequence, `[head][query][key]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTensor {
    pub scores: Vec<Vec<Vec<f64>>>,
    /// Which positions hold real (non-pad) tokens.
    pub mask: Vec<bool>,
}

impl AttentionTensor {
    pub fn n_heads(&self) -> usize {
        self.scores.len()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel {
    config: AttentionConfig,
    params: Params,
    positional: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: AttentionConfig,
    shapes: Vec<TensorShape>,
    params: Params,
}

/// Fixed sinusoidal position table, `max_len × d_model`.
pub fn sinusoidal_positions(max_len: usize, d_model: usize) -> Vec<f64> {
    let mut pe = vec![0.0; max_len * d_model];
    for p in 0..max_len {
        for c in 0..d_model {
            let i = (c / 2) as f64;
            let angle = p as f64 / 10000f64.powf(2.0 * i / d_model as f64);
            pe[p * d_model + c] = if c % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

impl AttentionModel {
    pub fn new(config: AttentionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::from_params(config, Params::init(&config, seed))
    }

    pub fn from_params(config: AttentionConfig, params: Params) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(AttentionModel {
            positional: sinusoidal_positions(config.max_len, config.d_model),
            config,
            params,
        })
    }

    pub fn config(&self) -> &AttentionConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Evaluation-mode forward pass (dropout disabled).
    pub fn forward(&self, seq: &TokenSequence) -> Result<(f64, AttentionTensor)> {
        let cache = self.forward_cached(seq, None)?;
        let prob = network::sigmoid(cache.logit);
        Ok((prob, cache.attention_tensor(&self.config)))
    }

    pub fn predict_proba(&self, seq: &TokenSequence) -> Result<f64> {
        Ok(network::sigmoid(self.forward_cached(seq, None)?.logit))
    }

    pub fn predict_many(&self, seqs: &[TokenSequence]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        seqs.par_iter().map(|s| self.predict_proba(s)).collect()
    }

    /// Binary cross-entropy and its gradient for one sample. With a dropout
    /// seed the training-mode network is used, with masks drawn from that seed.
    pub fn loss_and_grad(
        &self,
        seq: &TokenSequence,
        positive: bool,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Params)> {
        let mut rng = dropout_seed.map(seed::rng);
        let cache = self.forward_cached(seq, rng.as_mut())?;
        let y = if positive { 1.0 } else { 0.0 };
        let loss = network::bce_with_logits(cache.logit, y);
        let grads = self.backward(&cache, network::sigmoid(cache.logit) - y);
        Ok((loss, grads))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        let ck = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: self.config,
            shapes: Params::shapes(&self.config)
                .into_iter()
                .map(|(n, s)| TensorShape {
                    name: n.to_owned(),
                    shape: s,
                })
                .collect(),
            params: self.params.clone(),
        };
        serde_json::to_writer(BufWriter::new(f), &ck)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(f))?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.format_version
            )));
        }
        Self::from_params(ck.config, ck.params)
    }
}
