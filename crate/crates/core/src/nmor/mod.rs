//! Neural mixture of representations: a per-dimension soft gate over the
//! item-centric edit vector `v`, content vector `c` and relational vector
//! `r`, scored against the editor vector `e`:
//!
//! `x = e · (w_v ⊙ v + w_c ⊙ c + w_r ⊙ r)`.

mod gate;
mod train;

pub use gate::{GateParams, GateWeights, Layer};
pub use train::{train_nmor, train_nmor_masked, NegativeMode, NmorConfig, NmorReport};

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::mf::EmbeddingMatrix;

/// The four fixed inputs of one (editor, item) prediction.
#[derive(Debug, Clone, Copy)]
pub struct FusionInput<'a> {
    pub e: &'a [f64],
    pub v: &'a [f64],
    pub c: &'a [f64],
    pub r: &'a [f64],
}

fn check_dims(expected: usize, vs: &[&[f64]]) -> Result<()> {
    for v in vs {
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Gate weights at each of the `Z` positions; each triple is a softmax.
pub fn gate_forward(v: &[f64], c: &[f64], r: &[f64], params: &GateParams) -> Result<GateWeights> {
    check_dims(v.len(), &[c, r])?;
    let z = v.len();
    let mut out = GateWeights::constant(z, 0.0, 0.0, 0.0);
    for k in 0..z {
        let [wv, wc, wr] = params.position_weights(v[k], c[k], r[k]);
        out.v[k] = wv;
        out.c[k] = wc;
        out.r[k] = wr;
    }
    Ok(out)
}

/// `w_v ⊙ v + w_c ⊙ c + w_r ⊙ r`.
pub fn fuse(v: &[f64], c: &[f64], r: &[f64], w: &GateWeights) -> Result<Vec<f64>> {
    check_dims(v.len(), &[c, r, &w.v, &w.c, &w.r])?;
    Ok((0..v.len())
        .map(|k| w.v[k] * v[k] + w.c[k] * c[k] + w.r[k] * r[k])
        .collect())
}

/// Merged item vector produced by the gate.
pub fn fused_item(v: &[f64], c: &[f64], r: &[f64], params: &GateParams) -> Result<Vec<f64>> {
    let w = gate_forward(v, c, r, params)?;
    fuse(v, c, r, &w)
}

/// Preference score `x_ij`.
pub fn predict(input: FusionInput<'_>, params: &GateParams) -> Result<f64> {
    check_dims(input.e.len(), &[input.v, input.c, input.r])?;
    let item = fused_item(input.v, input.c, input.r, params)?;
    let x = crate::math::dot(input.e, &item);
    if !x.is_finite() {
        return Err(Error::Divergence("non-finite preference score".into()));
    }
    Ok(x)
}

/// `−[y ln σ(x) + (1−y) ln(1−σ(x))]` in softplus form.
pub fn bce_loss(x: f64, y: bool) -> f64 {
    if y {
        softplus(-x)
    } else {
        softplus(x)
    }
}

/// `d bce / dx = σ(x) − y`.
pub fn bce_grad(x: f64, y: bool) -> f64 {
    sigmoid(x) - if y { 1.0 } else { 0.0 }
}

/// Loss of one labelled example and its gradient with respect to every
/// gate parameter, accumulated into `grads`.
pub fn example_gradient(input: FusionInput<'_>, label: bool, params: &GateParams, grads: &mut GateParams) -> f64 {
    let z = input.e.len();
    let traces: Vec<_> = (0..z)
        .map(|k| params.trace_position([input.v[k], input.c[k], input.r[k]]))
        .collect();
    let mut x = 0.0;
    for (k, t) in traces.iter().enumerate() {
        let w = t.weights;
        x += input.e[k] * (w[0] * input.v[k] + w[1] * input.c[k] + w[2] * input.r[k]);
    }
    let gx = bce_grad(x, label);
    for (k, t) in traces.iter().enumerate() {
        let s = gx * input.e[k];
        if s != 0.0 {
            params.backward_position(t, [s * input.v[k], s * input.c[k], s * input.r[k]], grads);
        }
    }
    bce_loss(x, label)
}

/// Fused vectors for every row (rows of `v`, `c`, `r` must describe the
/// same items in the same order).
pub fn fused_matrix(
    v: &EmbeddingMatrix,
    c: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    params: &GateParams,
) -> Result<EmbeddingMatrix> {
    if v.ids() != c.ids() || v.ids() != r.ids() {
        return Err(Error::InvalidArgument("item representations are not aligned".into()));
    }
    let rows: Vec<Vec<f64>> = (0..v.rows())
        .into_par_iter()
        .map(|j| fused_item(&v.row_f64(j), &c.row_f64(j), &r.row_f64(j), params))
        .collect::<Result<_>>()?;
    EmbeddingMatrix::from_f64(v.ids().to_vec(), v.dim(), &rows.concat())
}

/// Sorts by descending score, ties by ascending id.
pub fn rank_scores(mut scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Scores candidate items (duplicates removed) for one editor and ranks
/// them. Candidates missing from a representation matrix use zero vectors.
pub fn score_candidates(
    e: &[f64],
    candidates: &[String],
    v: &EmbeddingMatrix,
    c: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    params: &GateParams,
) -> Result<Vec<(String, f64)>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("no candidates to score"));
    }
    let unique: BTreeSet<&String> = candidates.iter().collect();
    let zero = vec![0.0; e.len()];
    let row = |m: &EmbeddingMatrix, id: &str| m.index_of(id).map(|i| m.row_f64(i)).unwrap_or_else(|| zero.clone());
    let scored = unique
        .into_iter()
        .map(|id| {
            let (vv, cc, rr) = (row(v, id), row(c, id), row(r, id));
            let x = predict(FusionInput { e, v: &vv, c: &cc, r: &rr }, params)?;
            Ok((id.clone(), x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_scores(scored))
}
