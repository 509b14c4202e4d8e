//! Matrix factorization of the interaction matrix: BPR (the main edit
//! representation learner), plus GMF and eALS baselines.

mod bpr;
mod eals;
mod embedding;
mod gmf;

pub use bpr::{bpr_pair_loss, bpr_pair_loss_grad, bpr_sample_gradient, bpr_step, train_bpr, BprConfig, BprGradient};
pub use eals::{eals_objective, train_eals, EalsConfig};
pub use embedding::EmbeddingMatrix;
pub use gmf::{gmf_example_loss, train_gmf};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::seed::Rng;

/// Preference score `e · v`.
pub fn score(e: &[f32], v: &[f32]) -> Result<f64> {
    if e.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            actual: v.len(),
        });
    }
    Ok(crate::math::dot_f32(e, v))
}

/// Editor and item factors after training, with the per-epoch loss trace
/// (entry 0 is measured before the first update).
#[derive(Debug, Clone)]
pub struct Factors {
    pub editors: EmbeddingMatrix,
    pub items: EmbeddingMatrix,
    pub loss_log: Vec<f64>,
}

pub(crate) const INIT_SCALE: f64 = 0.01;

pub(crate) fn init_uniform(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
        .collect()
}

/// Uniform item not in `row` (sorted). `None` if the editor touched every item.
pub(crate) fn sample_negative(rng: &mut Rng, row: &[u32], n_items: usize) -> Option<usize> {
    if row.len() >= n_items {
        return None;
    }
    loop {
        let j = rng.random_range(0..n_items);
        if row.binary_search(&(j as u32)).is_err() {
            return Some(j);
        }
    }
}

pub(crate) fn finish(
    train: &InteractionMatrix,
    dim: usize,
    editors: &[f64],
    items: &[f64],
    loss_log: Vec<f64>,
) -> Result<Factors> {
    if editors.iter().chain(items).any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite factor after training".into()));
    }
    Ok(Factors {
        editors: EmbeddingMatrix::from_f64(train.editors().to_vec(), dim, editors)?,
        items: EmbeddingMatrix::from_f64(train.items().to_vec(), dim, items)?,
        loss_log,
    })
}

pub(crate) fn check_nonempty(train: &InteractionMatrix) -> Result<()> {
    if train.n_interactions() == 0 {
        return Err(Error::EmptyInput("training matrix has no interactions"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert!(matches!(score(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn score_matches_naive_loop_at_1024() {
        let mut rng = crate::seed::rng(3);
        let e: Vec<f32> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f32> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut naive = 0.0f64;
        for k in 0..1024 {
            naive += e[k] as f64 * v[k] as f64;
        }
        let s = score(&e, &v).unwrap();
        assert!((s - naive).abs() <= 1e-5 * naive.abs().max(1e-12));
    }
}
