use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{check_nonempty, finish, init_uniform, sample_negative, Factors};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::math::{dot, sigmoid, softplus};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BprConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for BprConfig {
    fn default() -> Self {
        BprConfig {
            dim: 1024,
            learning_rate: 0.05,
            l2_reg: 1e-4,
            epochs: 50,
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

impl BprConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.negatives_per_positive == 0 {
            return Err(Error::InvalidArgument("dim and negatives_per_positive must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.l2_reg < 0.0 {
            return Err(Error::InvalidArgument("learning_rate must be positive, l2_reg non-negative".into()));
        }
        Ok(())
    }
}

/// `-ln σ(s_pos - s_neg)`.
pub fn bpr_pair_loss(s_pos: f64, s_neg: f64) -> f64 {
    softplus(-(s_pos - s_neg))
}

/// Derivative of [`bpr_pair_loss`] with respect to `s_pos` (the negative of
/// the derivative with respect to `s_neg`).
pub fn bpr_pair_loss_grad(s_pos: f64, s_neg: f64) -> f64 {
    -sigmoid(-(s_pos - s_neg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprGradient {
    pub loss: f64,
    pub editor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Loss and gradients of one `(editor, positive, negative)` sample:
/// `-ln σ(e·v⁺ - e·v⁻) + l2/2 (|e|² + |v⁺|² + |v⁻|²)`.
pub fn bpr_sample_gradient(e: &[f64], vp: &[f64], vn: &[f64], l2: f64) -> BprGradient {
    let sp = dot(e, vp);
    let sn = dot(e, vn);
    let g = bpr_pair_loss_grad(sp, sn);
    let reg = 0.5 * l2 * (dot(e, e) + dot(vp, vp) + dot(vn, vn));
    BprGradient {
        loss: bpr_pair_loss(sp, sn) + reg,
        editor: (0..e.len()).map(|k| g * (vp[k] - vn[k]) + l2 * e[k]).collect(),
        positive: (0..e.len()).map(|k| g * e[k] + l2 * vp[k]).collect(),
        negative: (0..e.len()).map(|k| -g * e[k] + l2 * vn[k]).collect(),
    }
}

/// One SGD update on the flat factor arrays. Only rows `editor`, `pos`
/// and `neg` are touched.
#[allow(clippy::too_many_arguments)]
pub fn bpr_step(
    editors: &mut [f64],
    items: &mut [f64],
    dim: usize,
    editor: usize,
    pos: usize,
    neg: usize,
    lr: f64,
    l2: f64,
) -> f64 {
    let e = &editors[editor * dim..(editor + 1) * dim];
    let vp = &items[pos * dim..(pos + 1) * dim];
    let vn = &items[neg * dim..(neg + 1) * dim];
    let grad = bpr_sample_gradient(e, vp, vn, l2);
    for k in 0..dim {
        editors[editor * dim + k] -= lr * grad.editor[k];
        items[pos * dim + k] -= lr * grad.positive[k];
        items[neg * dim + k] -= lr * grad.negative[k];
    }
    grad.loss
}

pub(crate) fn probe_triples(train: &InteractionMatrix, seed: u64, count: usize) -> Vec<(usize, usize, usize)> {
    let mut rng = seed::rng(seed::sub_seed(seed, "bpr-probe"));
    let pairs: Vec<(usize, usize)> = train.entries().collect();
    let mut out = Vec::with_capacity(count);
    if pairs.is_empty() {
        return out;
    }
    for _ in 0..count {
        let (i, j) = *pairs.choose(&mut rng).expect("non-empty");
        if let Some(n) = sample_negative(&mut rng, train.row(i), train.n_items()) {
            out.push((i, j, n));
        }
    }
    out
}

fn probe_loss(probe: &[(usize, usize, usize)], editors: &[f64], items: &[f64], dim: usize) -> f64 {
    if probe.is_empty() {
        return 0.0;
    }
    let row = |m: &[f64], i: usize| -> Vec<f64> { m[i * dim..(i + 1) * dim].to_vec() };
    probe
        .iter()
        .map(|&(i, p, n)| {
            let e = row(editors, i);
            bpr_pair_loss(dot(&e, &row(items, p)), dot(&e, &row(items, n)))
        })
        .sum::<f64>()
        / probe.len() as f64
}

/// SGD over shuffled positive pairs; each positive is paired with
/// `negatives_per_positive` unobserved items drawn with replacement.
pub fn train_bpr(train: &InteractionMatrix, cfg: &BprConfig) -> Result<Factors> {
    cfg.validate()?;
    check_nonempty(train)?;
    let dim = cfg.dim;
    let mut rng: Rng = seed::rng(cfg.seed);
    let mut editors = init_uniform(&mut rng, train.n_editors() * dim);
    let mut items = init_uniform(&mut rng, train.n_items() * dim);
    let probe = probe_triples(train, cfg.seed, 512);
    let mut pairs: Vec<(usize, usize)> = train.entries().collect();
    let mut log = vec![probe_loss(&probe, &editors, &items, dim)];
    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        for &(i, j) in &pairs {
            for _ in 0..cfg.negatives_per_positive {
                let Some(n) = sample_negative(&mut rng, train.row(i), train.n_items()) else {
                    continue;
                };
                bpr_step(&mut editors, &mut items, dim, i, j, n, cfg.learning_rate, cfg.l2_reg);
            }
        }
        let loss = probe_loss(&probe, &editors, &items, dim);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("BPR probe loss is {loss} at epoch {}", epoch + 1)));
        }
        log::debug!("bpr epoch {} probe loss {loss:.6}", epoch + 1);
        log.push(loss);
    }
    finish(train, dim, &editors, &items, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn equal_scores_give_ln2() {
        assert!((bpr_pair_loss(0.3, 0.3) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn large_margin_does_not_overflow() {
        let l = bpr_pair_loss(20.0, 0.0);
        assert!((l - 2.061153622e-9).abs() < 1e-17, "{l}");
        assert!(bpr_pair_loss(1e6, 0.0) >= 0.0);
        assert!(bpr_pair_loss(-1e6, 0.0).is_finite());
    }

    #[test]
    fn pair_loss_derivative_at_zero() {
        assert_eq!(bpr_pair_loss_grad(0.0, 0.0), -0.5);
        let h = 1e-6;
        let fd = (bpr_pair_loss(h, 0.0) - bpr_pair_loss(-h, 0.0)) / (2.0 * h);
        assert!((fd + 0.5).abs() < 1e-6);
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        let mut rng = seed::rng(11);
        let mut draw = || -> Vec<f64> { (0..3).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (e, vp, vn) = (draw(), draw(), draw());
        let l2 = 0.1;
        let g = bpr_sample_gradient(&e, &vp, &vn, l2);
        let loss = |e: &[f64], vp: &[f64], vn: &[f64]| bpr_sample_gradient(e, vp, vn, l2).loss;
        let h = 1e-5;
        for k in 0..3 {
            let bump = |v: &[f64], s: f64| {
                let mut v = v.to_vec();
                v[k] += s;
                v
            };
            let fe = (loss(&bump(&e, h), &vp, &vn) - loss(&bump(&e, -h), &vp, &vn)) / (2.0 * h);
            let fp = (loss(&e, &bump(&vp, h), &vn) - loss(&e, &bump(&vp, -h), &vn)) / (2.0 * h);
            let fnn = (loss(&e, &vp, &bump(&vn, h)) - loss(&e, &vp, &bump(&vn, -h))) / (2.0 * h);
            for (a, b) in [(g.editor[k], fe), (g.positive[k], fp), (g.negative[k], fnn)] {
                assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-8), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn unregularized_step_touches_three_rows() {
        let mut rng = seed::rng(5);
        let dim = 3;
        let mut editors: Vec<f64> = (0..5 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut items: Vec<f64> = (0..5 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (e0, i0) = (editors.clone(), items.clone());
        bpr_step(&mut editors, &mut items, dim, 2, 1, 4, 0.1, 0.0);
        for r in 0..5 {
            let same_e = editors[r * dim..(r + 1) * dim] == e0[r * dim..(r + 1) * dim];
            let same_i = items[r * dim..(r + 1) * dim] == i0[r * dim..(r + 1) * dim];
            assert_eq!(same_e, r != 2, "editor row {r}");
            assert_eq!(same_i, r != 1 && r != 4, "item row {r}");
        }
    }

    fn tiny() -> InteractionMatrix {
        InteractionMatrix::from_pairs(
            (0..4).map(|i| format!("u{i}")).collect(),
            (0..6).map(|j| format!("Q{j}")).collect(),
            [(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 4), (3, 5), (3, 4)],
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = BprConfig {
            dim: 4,
            epochs: 0,
            seed: 9,
            ..BprConfig::default()
        };
        let f = train_bpr(&tiny(), &cfg).unwrap();
        let mut rng = seed::rng(9);
        let e = init_uniform(&mut rng, 4 * 4);
        let v = init_uniform(&mut rng, 6 * 4);
        let e32: Vec<f32> = e.iter().map(|&x| x as f32).collect();
        let v32: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        assert_eq!(f.editors.data(), e32.as_slice());
        assert_eq!(f.items.data(), v32.as_slice());
        assert!(f.editors.data().iter().all(|x| x.abs() <= 0.01));
    }

    #[test]
    fn identical_seeds_identical_factors() {
        let cfg = BprConfig {
            dim: 4,
            epochs: 5,
            seed: 1,
            ..BprConfig::default()
        };
        let a = train_bpr(&tiny(), &cfg).unwrap();
        let b = train_bpr(&tiny(), &cfg).unwrap();
        assert_eq!(a.editors, b.editors);
        assert_eq!(a.items, b.items);
        let c = train_bpr(&tiny(), &BprConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.items, c.items);
    }

    #[test]
    fn empty_matrix_rejected() {
        let m = tiny().empty_like();
        assert!(train_bpr(&m, &BprConfig::default()).is_err());
    }
}
