use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttentionModel, Params};
use crate::encoding::TokenSequence;
use crate::error::{Error, Result};
use crate::eventlog::Label;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("invalid Adam hyper-parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss (dropout active) per epoch.
    pub loss_history: Vec<f64>,
    pub steps: usize,
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut Params, grads: &Params, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Mini-batch Adam on binary cross-entropy.
///
/// Samples in a batch are processed in parallel; their gradients are summed
/// in batch order, so results do not depend on the thread count. Dropout
/// masks come from a per-(epoch, sample) stream.
pub fn train(
    mut model: AttentionModel,
    seqs: &[TokenSequence],
    labels: &[Label],
    cfg: &TrainConfig,
) -> Result<(AttentionModel, TrainReport)> {
    cfg.validate()?;
    if seqs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: seqs.len(),
        });
    }
    for class in Label::BOTH {
        if !labels.contains(&class) {
            return Err(Error::Precondition(format!(
                "attention model training needs samples of class {class}"
            )));
        }
    }
    for s in seqs {
        model.check_sequence(s)?;
    }

    let shuffle_seed = seed::derive(cfg.seed, "shuffle");
    let dropout_seed = seed::derive(cfg.seed, "dropout");
    let mut adam = Adam {
        m: Params::zeros(model.config()),
        v: Params::zeros(model.config()),
        t: 0,
    };
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    for epoch in 0..cfg.epochs {
        let epoch_seed = seed::derive_index(dropout_seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::derive_index(shuffle_seed, epoch as u64)));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<(f64, Params)> = batch
                .par_iter()
                .map(|&i| {
                    model.loss_and_grad(
                        &seqs[i],
                        labels[i].is_positive(),
                        Some(seed::derive_index(epoch_seed, i as u64)),
                    )
                })
                .collect::<Result<_>>()?;
            let mut grads = Params::zeros(model.config());
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                grads.add_assign(g);
            }
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became {loss} at epoch {epoch}, batch {b} (learning rate {}, seed {}); \
                     try a smaller learning rate or a different initialisation seed",
                    cfg.learning_rate, cfg.seed
                )));
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &grads, cfg);
            steps += 1;
            epoch_loss += loss;
        }
        let mean_loss = epoch_loss / seqs.len() as f64;
        log::debug!("epoch {epoch}: loss {mean_loss:.6}");
        history.push(mean_loss);
    }
    if !model.params().is_finite() {
        return Err(Error::Diverged("parameters became non-finite".into()));
    }
    Ok((
        model,
        TrainReport {
            loss_history: history,
            steps,
        },
    ))
}
