use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{example_gradient, FusionInput, GateParams};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::mf::EmbeddingMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Fresh negatives every epoch.
    #[default]
    Resample,
    /// Negatives drawn once before the first epoch.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmorConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub negatives: NegativeMode,
    pub seed: u64,
}

impl Default for NmorConfig {
    fn default() -> Self {
        NmorConfig {
            hidden: 1024,
            batch_size: 32,
            learning_rate: 0.001,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            negatives: NegativeMode::Resample,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmorReport {
    /// Mean example loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub missing_editors: usize,
    pub missing_items: [usize; 3],
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut GateParams, grads: &GateParams, scale: f64, cfg: &NmorConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let g = grads.flat();
        for (k, p) in params.flat_mut().into_iter().enumerate() {
            let gk = g[k] * scale;
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * gk;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

fn align(m: &EmbeddingMatrix, ids: &[String], what: &str) -> (Vec<f64>, usize) {
    let (aligned, missing) = m.align_to(ids);
    if missing > 0 {
        log::warn!("{missing} {what} rows missing; zero vectors used");
    }
    (aligned.to_f64(), missing)
}

fn negatives(train: &InteractionMatrix, positives: &[(usize, usize)], rng: &mut seed::Rng) -> Vec<(usize, usize)> {
    positives
        .iter()
        .filter_map(|&(i, _)| crate::mf::sample_negative(rng, train.row(i), train.n_items()).map(|j| (i, j)))
        .collect()
}

/// Trains only the gate: every positive of `train` plus an equal number of
/// sampled unobserved cells per epoch, minibatch Adam on the mean BCE of
/// each batch. Editor and item representations stay fixed; rows missing
/// from them are zero.
pub fn train_nmor(
    train: &InteractionMatrix,
    editors: &EmbeddingMatrix,
    v: &EmbeddingMatrix,
    c: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    cfg: &NmorConfig,
) -> Result<(GateParams, NmorReport)> {
    train_nmor_masked(train, train, editors, v, c, r, cfg)
}

/// As [`train_nmor`] with positives from `train` and negatives drawn
/// outside `observed`, a matrix over the same index space that contains
/// `train` (for instance train plus validation).
pub fn train_nmor_masked(
    train: &InteractionMatrix,
    observed: &InteractionMatrix,
    editors: &EmbeddingMatrix,
    v: &EmbeddingMatrix,
    c: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    cfg: &NmorConfig,
) -> Result<(GateParams, NmorReport)> {
    if observed.editors() != train.editors() || observed.items() != train.items() {
        return Err(Error::InvalidArgument("observed matrix must share the training index space".into()));
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("invalid NMoR configuration".into()));
    }
    if train.n_interactions() == 0 {
        return Err(Error::EmptyInput("training matrix has no interactions"));
    }
    let dim = editors.dim();
    for m in [v, c, r] {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
    }
    let (e_data, missing_editors) = align(editors, train.editors(), "editor");
    let (v_data, mv) = align(v, train.items(), "item-centric");
    let (c_data, mc) = align(c, train.items(), "content");
    let (r_data, mr) = align(r, train.items(), "relational");
    let row = |k: usize| k * dim..(k + 1) * dim;

    let mut rng = seed::rng(cfg.seed);
    let mut params = GateParams::init(cfg.hidden, &mut rng);
    let mut adam = Adam {
        m: vec![0.0; params.n_params()],
        v: vec![0.0; params.n_params()],
        t: 0,
    };
    let positives: Vec<(usize, usize)> = train.entries().collect();
    let mut fixed = match cfg.negatives {
        NegativeMode::Fixed => Some(negatives(observed, &positives, &mut rng)),
        NegativeMode::Resample => None,
    };
    let mut report = NmorReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        missing_editors,
        missing_items: [mv, mc, mr],
    };
    let mut grads = params.zeros_like();
    for epoch in 0..cfg.epochs {
        let negs = match &mut fixed {
            Some(n) => n.clone(),
            None => negatives(observed, &positives, &mut rng),
        };
        let mut examples: Vec<(usize, usize, bool)> = positives
            .iter()
            .map(|&(i, j)| (i, j, true))
            .chain(negs.iter().map(|&(i, j)| (i, j, false)))
            .collect();
        examples.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in examples.chunks(cfg.batch_size) {
            for l in grads.layers.iter_mut() {
                l.weights.iter_mut().for_each(|g| *g = 0.0);
                l.bias.iter_mut().for_each(|g| *g = 0.0);
            }
            for &(i, j, label) in batch {
                let input = FusionInput {
                    e: &e_data[row(i)],
                    v: &v_data[row(j)],
                    c: &c_data[row(j)],
                    r: &r_data[row(j)],
                };
                total += example_gradient(input, label, &params, &mut grads);
            }
            adam.step(&mut params, &grads, 1.0 / batch.len() as f64, cfg);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Divergence(format!("NMoR loss is {mean} at epoch {}", epoch + 1)));
        }
        log::debug!("nmor epoch {} loss {mean:.6}", epoch + 1);
        report.epoch_losses.push(mean);
    }
    for p in params.flat_mut() {
        *p = *p as f32 as f64;
    }
    Ok((params, report))
}
