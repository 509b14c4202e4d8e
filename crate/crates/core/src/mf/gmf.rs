use rand::seq::SliceRandom;

use super::{check_nonempty, finish, init_uniform, sample_negative, BprConfig, Factors};
use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus};
use crate::ingest::InteractionMatrix;
use crate::seed;

/// Binary cross-entropy of `σ(logit)` against `label`.
pub fn gmf_example_loss(logit: f64, label: bool) -> f64 {
    if label {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

fn sgd(editors: &mut [f64], items: &mut [f64], dim: usize, i: usize, j: usize, label: bool, cfg: &BprConfig) -> f64 {
    let e = editors[i * dim..(i + 1) * dim].to_vec();
    let v = items[j * dim..(j + 1) * dim].to_vec();
    let x = dot(&e, &v);
    let g = sigmoid(x) - if label { 1.0 } else { 0.0 };
    for k in 0..dim {
        editors[i * dim + k] -= cfg.learning_rate * (g * v[k] + cfg.l2_reg * e[k]);
        items[j * dim + k] -= cfg.learning_rate * (g * e[k] + cfg.l2_reg * v[k]);
    }
    gmf_example_loss(x, label)
}

/// Generalized MF with an identity output layer: logistic regression on
/// `e·v`, one sampled negative per positive per epoch. The loss trace is
/// the mean example loss of each epoch (entry 0 is the first epoch's
/// pre-update value on the probe set).
pub fn train_gmf(train: &InteractionMatrix, cfg: &BprConfig) -> Result<Factors> {
    cfg.validate()?;
    check_nonempty(train)?;
    let dim = cfg.dim;
    let mut rng = seed::rng(cfg.seed);
    let mut editors = init_uniform(&mut rng, train.n_editors() * dim);
    let mut items = init_uniform(&mut rng, train.n_items() * dim);
    let probe = super::bpr::probe_triples(train, cfg.seed, 512);
    let probe_loss = |editors: &[f64], items: &[f64]| -> f64 {
        if probe.is_empty() {
            return 0.0;
        }
        probe
            .iter()
            .map(|&(i, p, n)| {
                let e = &editors[i * dim..(i + 1) * dim];
                gmf_example_loss(dot(e, &items[p * dim..(p + 1) * dim]), true)
                    + gmf_example_loss(dot(e, &items[n * dim..(n + 1) * dim]), false)
            })
            .sum::<f64>()
            / (2 * probe.len()) as f64
    };
    let mut log = vec![probe_loss(&editors, &items)];
    let mut pairs: Vec<(usize, usize)> = train.entries().collect();
    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        for &(i, j) in &pairs {
            sgd(&mut editors, &mut items, dim, i, j, true, cfg);
            for _ in 0..cfg.negatives_per_positive {
                if let Some(n) = sample_negative(&mut rng, train.row(i), train.n_items()) {
                    sgd(&mut editors, &mut items, dim, i, n, false, cfg);
                }
            }
        }
        let loss = probe_loss(&editors, &items);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("GMF loss is {loss} at epoch {}", epoch + 1)));
        }
        log.push(loss);
    }
    finish(train, dim, &editors, &items, log)
}
