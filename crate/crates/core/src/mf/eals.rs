use serde::{Deserialize, Serialize};

use super::{check_nonempty, finish, init_uniform, Factors};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::math::{dot, solve_with_jitter};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EalsConfig {
    pub dim: usize,
    pub l2_reg: f64,
    /// Full alternating sweeps (editors then items).
    pub epochs: usize,
    /// Exponent applied to item popularity for the unobserved-cell weight.
    pub popularity_exponent: f64,
    /// Mean weight of an unobserved cell.
    pub unobserved_weight: f64,
    pub seed: u64,
}

impl Default for EalsConfig {
    fn default() -> Self {
        EalsConfig {
            dim: 1024,
            l2_reg: 0.01,
            epochs: 20,
            popularity_exponent: 0.5,
            unobserved_weight: 0.1,
            seed: 0,
        }
    }
}

/// Unobserved-cell weight per item: `w0 · M · p_j^α / Σ p^α`, so the mean
/// over items is `w0`. Items nobody edited get weight zero.
fn item_weights(train: &InteractionMatrix, cfg: &EalsConfig) -> Vec<f64> {
    let pop: Vec<f64> = train
        .item_degrees()
        .into_iter()
        .map(|d| (d as f64).powf(cfg.popularity_exponent))
        .collect();
    let total: f64 = pop.iter().sum();
    let m = train.n_items() as f64;
    pop.iter().map(|p| cfg.unobserved_weight * m * p / total).collect()
}

/// Weighted squared loss plus L2:
/// `Σ_ij w_ij (a_ij − e_i·v_j)² + λ(Σ|e_i|² + Σ|v_j|²)` with `w_ij = 1`
/// on observed cells and the item weight elsewhere. Full summation.
pub fn eals_objective(train: &InteractionMatrix, cfg: &EalsConfig, editors: &[f64], items: &[f64]) -> f64 {
    let dim = cfg.dim;
    let weights = item_weights(train, cfg);
    let mut total = 0.0;
    for i in 0..train.n_editors() {
        let e = &editors[i * dim..(i + 1) * dim];
        for (j, &w) in weights.iter().enumerate() {
            let v = &items[j * dim..(j + 1) * dim];
            let pred = dot(e, v);
            total += if train.contains(i, j) {
                (1.0 - pred).powi(2)
            } else {
                w * pred * pred
            };
        }
    }
    total + cfg.l2_reg * (dot(editors, editors) + dot(items, items))
}

/// Exact weighted ALS with a cached Gram matrix: each row update solves
/// `(Σ_k c_k x_k x_kᵀ + Σ_obs (1 − c_k) x_k x_kᵀ + λI) y = Σ_obs x_k`.
/// Every update minimizes the objective in its block, so the objective is
/// non-increasing across sweeps. The loss trace holds the objective after
/// each sweep (entry 0 at initialization).
pub fn train_eals(train: &InteractionMatrix, cfg: &EalsConfig) -> Result<Factors> {
    check_nonempty(train)?;
    if cfg.dim == 0 || cfg.l2_reg < 0.0 || cfg.unobserved_weight < 0.0 {
        return Err(Error::InvalidArgument("invalid eALS configuration".into()));
    }
    let dim = cfg.dim;
    let mut rng = seed::rng(cfg.seed);
    let mut editors = init_uniform(&mut rng, train.n_editors() * dim);
    let mut items = init_uniform(&mut rng, train.n_items() * dim);
    let weights = item_weights(train, cfg);
    let columns = train.columns();
    let mut log = vec![eals_objective(train, cfg, &editors, &items)];
    for sweep in 0..cfg.epochs {
        // editors: unobserved weight depends on the item
        let mut gram = vec![0.0; dim * dim];
        for (j, &c) in weights.iter().enumerate() {
            add_outer(&mut gram, &items[j * dim..(j + 1) * dim], c);
        }
        for i in 0..train.n_editors() {
            let mut a = gram.clone();
            let mut b = vec![0.0; dim];
            for &j in train.row(i) {
                let j = j as usize;
                let v = &items[j * dim..(j + 1) * dim];
                add_outer(&mut a, v, 1.0 - weights[j]);
                for k in 0..dim {
                    b[k] += v[k];
                }
            }
            add_ridge(&mut a, dim, cfg.l2_reg);
            let (x, _) = solve_with_jitter(&a, &b, dim);
            editors[i * dim..(i + 1) * dim].copy_from_slice(&x);
        }
        // items: one weight per item, so the Gram over editors is shared
        let mut gram = vec![0.0; dim * dim];
        for i in 0..train.n_editors() {
            add_outer(&mut gram, &editors[i * dim..(i + 1) * dim], 1.0);
        }
        for (j, col) in columns.iter().enumerate() {
            let c = weights[j];
            let mut a: Vec<f64> = gram.iter().map(|g| g * c).collect();
            let mut b = vec![0.0; dim];
            for &i in col {
                let e = &editors[i as usize * dim..(i as usize + 1) * dim];
                add_outer(&mut a, e, 1.0 - c);
                for k in 0..dim {
                    b[k] += e[k];
                }
            }
            add_ridge(&mut a, dim, cfg.l2_reg);
            let (x, _) = solve_with_jitter(&a, &b, dim);
            items[j * dim..(j + 1) * dim].copy_from_slice(&x);
        }
        let obj = eals_objective(train, cfg, &editors, &items);
        if !obj.is_finite() {
            return Err(Error::Divergence(format!("eALS objective is {obj} after sweep {}", sweep + 1)));
        }
        log::debug!("eals sweep {} objective {obj:.6}", sweep + 1);
        log.push(obj);
    }
    finish(train, dim, &editors, &items, log)
}

fn add_outer(a: &mut [f64], x: &[f64], w: f64) {
    let n = x.len();
    for r in 0..n {
        let s = w * x[r];
        for c in 0..n {
            a[r * n + c] += s * x[c];
        }
    }
}

fn add_ridge(a: &mut [f64], n: usize, lambda: f64) {
    for k in 0..n {
        a[k * n + k] += lambda;
    }
}
