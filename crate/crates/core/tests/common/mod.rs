//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner. Nothing here calls the code path it checks.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use wdrec_core::eval::{
    average_recall_at_k, catalog_coverage, intra_list_diversity, mean_average_recall, precision_at_k, recall_at_k,
};
use wdrec_core::graph::{transr_example_gradient, TransRModel};
use wdrec_core::ingest::{InteractionMatrix, Triple, TripleStore};
use wdrec_core::math::dot_f32;
use wdrec_core::mf::{bpr_sample_gradient, BprConfig, EmbeddingMatrix};
use wdrec_core::nmor::{bce_loss, example_gradient, predict, FusionInput, GateParams};
use wdrec_core::seed::{self, Rng as SeedRng};
use wdrec_core::text::sgns_pair_gradient;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central differences of `f` at `x`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            p[k] = x[k] + FD_STEP;
            let up = f(&p);
            p[k] = x[k] - FD_STEP;
            let down = f(&p);
            p[k] = x[k];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn max_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_err(a, n)).fold(0.0, f64::max)
}

fn uniform(rng: &mut SeedRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Worst relative error of the BPR sample gradient (editor, positive and
/// negative rows) over random `N = M = 5`, `Z = 3` instances.
pub fn bpr_gradient_error(seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let (n, m, z, l2) = (5, 5, 3, 0.01);
    let editors = uniform(&mut rng, n * z, 1.0);
    let items = uniform(&mut rng, m * z, 1.0);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let p = rng.random_range(0..m);
        let q = (p + rng.random_range(1..m)) % m;
        let (e, vp, vn) = (&editors[i * z..(i + 1) * z], &items[p * z..(p + 1) * z], &items[q * z..(q + 1) * z]);
        let g = bpr_sample_gradient(e, vp, vn, l2);
        let fe = central_diff(&|x| bpr_sample_gradient(x, vp, vn, l2).loss, e);
        let fp = central_diff(&|x| bpr_sample_gradient(e, x, vn, l2).loss, vp);
        let fnn = central_diff(&|x| bpr_sample_gradient(e, vp, x, l2).loss, vn);
        worst = worst.max(max_err(&g.editor, &fe)).max(max_err(&g.positive, &fp)).max(max_err(&g.negative, &fnn));
    }
    worst
}

/// Worst relative error of the skip-gram pair gradient (center, context and
/// each negative) at `Z = 4` with three negatives.
pub fn sgns_gradient_error(seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let z = 4;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let center = uniform(&mut rng, z, 1.0);
        let context = uniform(&mut rng, z, 1.0);
        let negs: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut rng, z, 1.0)).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let g = sgns_pair_gradient(&center, &context, &neg_refs);
        let fc = central_diff(&|x| sgns_pair_gradient(x, &context, &neg_refs).loss, &center);
        let fx = central_diff(&|x| sgns_pair_gradient(&center, x, &neg_refs).loss, &context);
        worst = worst.max(max_err(&g.center, &fc)).max(max_err(&g.context, &fx));
        for k in 0..negs.len() {
            let fk = central_diff(
                &|x| {
                    let mut refs = neg_refs.clone();
                    refs[k] = x;
                    sgns_pair_gradient(&center, &context, &refs).loss
                },
                &negs[k],
            );
            worst = worst.max(max_err(&g.negatives[k], &fk));
        }
    }
    worst
}

fn transr_model(rng: &mut SeedRng, z: usize, ne: usize, nr: usize) -> TransRModel {
    TransRModel::new(
        z,
        (0..ne).map(|k| format!("e{k}")).collect(),
        (0..nr).map(|k| format!("r{k}")).collect(),
        uniform(rng, ne * z, 1.0),
        uniform(rng, nr * z, 1.0),
        uniform(rng, nr * z * z, 1.0),
        rng.random_range(-1.0..1.0),
    )
    .unwrap()
}

/// Worst relative error of the TransR example gradient over every
/// parameter group (head, tail, relation, projection, bias) at `Z = 3`.
pub fn transr_gradient_error(seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let z = 3;
    let base = transr_model(&mut rng, z, 4, 2);
    let mut worst: f64 = 0.0;
    for (h, r, t) in [(0, 0, 1), (2, 1, 3), (3, 0, 0), (1, 1, 2)] {
        for label in [true, false] {
            let g = transr_example_gradient(&base, h, r, t, label);
            let loss_with = |edit: &dyn Fn(&mut TransRModel)| {
                let mut m = base.clone();
                edit(&mut m);
                transr_example_gradient(&m, h, r, t, label).loss
            };
            let fh = central_diff(&|x| loss_with(&|m| m.entities[h * z..(h + 1) * z].copy_from_slice(x)), base.entity(h));
            let ft = central_diff(&|x| loss_with(&|m| m.entities[t * z..(t + 1) * z].copy_from_slice(x)), base.entity(t));
            let fr = central_diff(&|x| loss_with(&|m| m.relations[r * z..(r + 1) * z].copy_from_slice(x)), base.relation(r));
            let fm = central_diff(
                &|x| loss_with(&|m| m.projections[r * z * z..(r + 1) * z * z].copy_from_slice(x)),
                base.projection(r),
            );
            let fb = central_diff(&|x| loss_with(&|m| m.score_bias = x[0]), &[base.score_bias]);
            worst = worst
                .max(max_err(&g.head, &fh))
                .max(max_err(&g.tail, &ft))
                .max(max_err(&g.relation, &fr))
                .max(max_err(&g.projection, &fm))
                .max(rel_err(g.bias, fb[0]));
        }
    }
    worst
}

/// Gate parameters with every weight and bias drawn in `±scale`.
pub fn random_gate(rng: &mut SeedRng, hidden: usize, scale: f64) -> GateParams {
    let mut p = GateParams::init(hidden, rng);
    for w in p.flat_mut() {
        *w = rng.random_range(-scale..scale);
    }
    p
}

/// Worst relative error of the gradient of the BCE loss with respect to
/// every gate parameter at `Z = 4`, `H = 5`.
pub fn nmor_gradient_error(seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let (z, hidden) = (4, 5);
    let mut worst: f64 = 0.0;
    for case in 0..6 {
        let params = random_gate(&mut rng, hidden, 1.0);
        let vecs: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, z, 1.5)).collect();
        let input = FusionInput {
            e: &vecs[0],
            v: &vecs[1],
            c: &vecs[2],
            r: &vecs[3],
        };
        let label = case % 2 == 0;
        let mut grads = params.zeros_like();
        example_gradient(input, label, &params, &mut grads);
        let flat = params.flat();
        let numeric = central_diff(
            &|x| {
                let mut p = params.clone();
                for (slot, &v) in p.flat_mut().into_iter().zip(x) {
                    *slot = v;
                }
                bce_loss(predict(input, &p).unwrap(), label)
            },
            &flat,
        );
        worst = worst.max(max_err(&grads.flat(), &numeric));
    }
    worst
}

/// Brute-force metrics of one ranked list, computed by nested loops.
pub struct BruteMetrics {
    pub hits: usize,
    pub precision: f64,
    pub recall: f64,
    pub average_recall: f64,
}

pub fn brute_metrics(ranked: &[usize], relevant: &[usize], k: usize) -> BruteMetrics {
    let hits_in = |depth: usize| {
        let mut count = 0;
        for pos in 0..depth.min(ranked.len()) {
            for r in relevant {
                if ranked[pos] == *r {
                    count += 1;
                }
            }
        }
        count
    };
    let hits = hits_in(k);
    let mut ar = 0.0;
    for i in 1..=k {
        ar += hits_in(i) as f64 / relevant.len() as f64;
    }
    BruteMetrics {
        hits,
        precision: hits as f64 / k as f64,
        recall: hits as f64 / relevant.len() as f64,
        average_recall: ar / k as f64,
    }
}

/// Mean over pairs of `(1 − cos) / 2` in f64, skipping zero rows; `None`
/// when fewer than two rows remain.
pub fn brute_diversity(items: &[usize], rows: &[Vec<f32>]) -> Option<f64> {
    let kept: Vec<Vec<f64>> = items
        .iter()
        .map(|&j| rows[j].iter().map(|&x| x as f64).collect::<Vec<f64>>())
        .filter(|r| r.iter().any(|&x| x != 0.0))
        .collect();
    if kept.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..kept.len() {
        for b in a + 1..kept.len() {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for k in 0..kept[a].len() {
                dot += kept[a][k] * kept[b][k];
                na += kept[a][k] * kept[a][k];
                nb += kept[b][k] * kept[b][k];
            }
            total += (1.0 - dot / (na.sqrt() * nb.sqrt())) / 2.0;
            pairs += 1;
        }
    }
    Some((total / pairs as f64).clamp(0.0, 1.0))
}

/// Distinct items across lists, counted with a presence table.
pub fn brute_coverage(lists: &[Vec<usize>], catalog: usize) -> usize {
    let mut seen = vec![false; catalog];
    for list in lists {
        for &j in list {
            seen[j] = true;
        }
    }
    seen.iter().filter(|&&s| s).count()
}

/// Checks every metric against the brute-force oracles on `instances`
/// random cases with at most 20 candidates. Returns the first mismatch.
pub fn metric_oracle_check(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = seed::rng(seed);
    for case in 0..instances {
        let catalog = rng.random_range(2..=20);
        let n_cand = rng.random_range(1..=catalog);
        let mut all: Vec<usize> = (0..catalog).collect();
        all.shuffle(&mut rng);
        let ranked: Vec<usize> = all[..n_cand].to_vec();
        let n_rel = rng.random_range(1..=catalog);
        all.shuffle(&mut rng);
        let relevant: Vec<usize> = all[..n_rel].to_vec();
        let rel_set: HashSet<usize> = relevant.iter().copied().collect();
        let k = rng.random_range(1..=n_cand + 2);

        let b = brute_metrics(&ranked, &relevant, k);
        let p = precision_at_k(&ranked, &rel_set, k).map_err(|e| e.to_string())?;
        let r = recall_at_k(&ranked, &rel_set, k).map_err(|e| e.to_string())?;
        let ar = average_recall_at_k(&ranked, &rel_set, k).map_err(|e| e.to_string())?;
        if p != b.precision || (p * k as f64).round() as usize != b.hits {
            return Err(format!("case {case}: precision {p} vs {}", b.precision));
        }
        if r != b.recall {
            return Err(format!("case {case}: recall {r} vs {}", b.recall));
        }
        if (ar - b.average_recall).abs() > 1e-9 {
            return Err(format!("case {case}: AR {ar} vs {}", b.average_recall));
        }

        let dim = rng.random_range(1..=4);
        let rows: Vec<Vec<f32>> = (0..catalog)
            .map(|_| {
                if rng.random_bool(0.15) {
                    vec![0.0; dim]
                } else {
                    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
                }
            })
            .collect();
        let content = EmbeddingMatrix::new(
            (0..catalog).map(|j| format!("Q{j}")).collect(),
            dim,
            rows.iter().flatten().copied().collect(),
        )
        .unwrap();
        let top: Vec<usize> = ranked.iter().take(k).copied().collect();
        match (intra_list_diversity(&top, &content), brute_diversity(&top, &rows)) {
            (Ok(d), Some(o)) if (d - o).abs() <= 1e-9 => {}
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: diversity {got:?} vs {want:?}")),
        }

        let n_lists = rng.random_range(1..=4);
        let lists: Vec<Vec<usize>> = (0..n_lists)
            .map(|_| {
                all.shuffle(&mut rng);
                all[..rng.random_range(0..=catalog.min(5))].to_vec()
            })
            .collect();
        let cov = catalog_coverage(&lists, catalog).map_err(|e| e.to_string())?;
        if cov != brute_coverage(&lists, catalog) as f64 / catalog as f64 {
            return Err(format!("case {case}: coverage {cov}"));
        }

        let editors: Vec<(Vec<usize>, HashSet<usize>)> = vec![(ranked.clone(), rel_set.clone()), (top.clone(), rel_set)];
        let mar = mean_average_recall(&editors, k).map_err(|e| e.to_string())?;
        let oracle = (b.average_recall + brute_metrics(&top, &relevant, k).average_recall) / 2.0;
        if (mar - oracle).abs() > 1e-9 {
            return Err(format!("case {case}: MAR {mar} vs {oracle}"));
        }
    }
    Ok(())
}

/// Weights triple of every position sums to one within `1e-6` and lies in
/// [0, 1], over `draws` random gates and inputs. Returns the worst sum error.
pub fn gate_simplex_check(draws: usize, seed: u64) -> Result<f64, String> {
    let mut rng = seed::rng(seed);
    let mut worst: f64 = 0.0;
    for d in 0..draws {
        let hidden = rng.random_range(1..=6);
        let scale = [0.1, 1.0, 10.0][d % 3];
        let params = random_gate(&mut rng, hidden, scale);
        let [v, c, r] = [0, 1, 2].map(|_| rng.random_range(-20.0..20.0));
        let w = params.position_weights(v, c, r);
        let err = (w[0] + w[1] + w[2] - 1.0).abs();
        worst = worst.max(err);
        if err > 1e-6 || w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(format!("draw {d}: weights {w:?}"));
        }
    }
    Ok(worst)
}

/// With `v = c = r = u`, `predict` equals `e·u` within `1e-6` over `draws`
/// random gates. Returns the worst absolute error.
pub fn convexity_check(draws: usize, seed: u64) -> Result<f64, String> {
    let mut rng = seed::rng(seed);
    let mut worst: f64 = 0.0;
    for d in 0..draws {
        let z = rng.random_range(1..=8);
        let hidden = rng.random_range(1..=6);
        let params = random_gate(&mut rng, hidden, 3.0);
        let u = uniform(&mut rng, z, 2.0);
        let e = uniform(&mut rng, z, 2.0);
        let x = predict(FusionInput { e: &e, v: &u, c: &u, r: &u }, &params).map_err(|e| e.to_string())?;
        let expect: f64 = e.iter().zip(&u).map(|(a, b)| a * b).sum();
        let err = (x - expect).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("draw {d}: {x} vs {expect}"));
        }
    }
    Ok(worst)
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

/// Block-diagonal matrix: editor `i` and item `j` belong to block
/// `i·blocks/n` and `j·blocks/m`; every in-block cell is an interaction.
/// `held_out` in-block items per editor go to the test matrix.
pub fn block_diagonal(n: usize, m: usize, blocks: usize, held_out: usize, seed: u64) -> (InteractionMatrix, InteractionMatrix) {
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..n {
        let b = i * blocks / n;
        let mut items: Vec<usize> = (0..m).filter(|j| j * blocks / m == b).collect();
        items.shuffle(&mut rng);
        for (k, &j) in items.iter().enumerate() {
            if k < held_out {
                test.push((i, j));
            } else {
                train.push((i, j));
            }
        }
    }
    (
        InteractionMatrix::from_pairs(ids("u", n), ids("Q", m), train).unwrap(),
        InteractionMatrix::from_pairs(ids("u", n), ids("Q", m), test).unwrap(),
    )
}

/// BPR settings used on the block-diagonal recovery instances.
pub fn recovery_bpr(dim: usize) -> BprConfig {
    BprConfig {
        dim,
        learning_rate: 0.1,
        l2_reg: 1e-4,
        epochs: 50,
        negatives_per_positive: 1,
        seed: 3,
    }
}

/// Fraction of (held-out positive, never-observed item) pairs per editor
/// ordered correctly, ties counting one half, by exhaustive enumeration.
pub fn exhaustive_auc(train: &InteractionMatrix, test: &InteractionMatrix, editors: &EmbeddingMatrix, items: &EmbeddingMatrix) -> f64 {
    let mut correct = 0.0;
    let mut pairs = 0usize;
    for i in 0..train.n_editors() {
        let e = editors.row(i);
        let known: HashSet<u32> = train.row(i).iter().chain(test.row(i)).copied().collect();
        for &p in test.row(i) {
            let sp = dot_f32(e, items.row(p as usize));
            for n in 0..train.n_items() {
                if known.contains(&(n as u32)) {
                    continue;
                }
                let sn = dot_f32(e, items.row(n));
                correct += if sp > sn {
                    1.0
                } else if sp == sn {
                    0.5
                } else {
                    0.0
                };
                pairs += 1;
            }
        }
    }
    correct / pairs as f64
}

/// Two clusters of `size` entities; relation `same` links every ordered
/// pair of distinct entities inside a cluster.
pub fn two_cluster_graph(size: usize) -> TripleStore {
    let mut triples = Vec::new();
    for cluster in ["a", "b"] {
        for x in 0..size {
            for y in 0..size {
                if x != y {
                    triples.push(Triple::new(format!("{cluster}{x}"), "same", format!("{cluster}{y}")));
                }
            }
        }
    }
    TripleStore::from_triples(triples)
}

/// Mean `same`-distance over within-cluster and cross-cluster ordered
/// pairs, from the full distance table.
pub fn cluster_distances(model: &TransRModel, size: usize) -> (f64, f64) {
    let r = model.relation_index("same").unwrap();
    let names: Vec<String> = ["a", "b"].iter().flat_map(|c| (0..size).map(move |x| format!("{c}{x}"))).collect();
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
    for h in &names {
        for t in &names {
            if h == t {
                continue;
            }
            let d = model.distance_indexed(model.entity_index(h).unwrap(), r, model.entity_index(t).unwrap());
            if h[..1] == t[..1] {
                within += d;
                nw += 1;
            } else {
                cross += d;
                nc += 1;
            }
        }
    }
    (within / nw as f64, cross / nc as f64)
}

/// Largest sub-matrix meeting both thresholds, by enumerating every subset
/// of editors and items. Only for tiny matrices.
pub fn exhaustive_fixed_point(m: &InteractionMatrix, min_items: usize, min_editors: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let (n, k) = (m.n_editors(), m.n_items());
    assert!(n + k <= 16, "exhaustive oracle is exponential");
    let mut best: (BTreeSet<usize>, BTreeSet<usize>) = (BTreeSet::new(), BTreeSet::new());
    for emask in 0u32..1 << n {
        for imask in 0u32..1 << k {
            let es: Vec<usize> = (0..n).filter(|i| emask >> i & 1 == 1).collect();
            let is: Vec<usize> = (0..k).filter(|j| imask >> j & 1 == 1).collect();
            let ok_e = es.iter().all(|&i| is.iter().filter(|&&j| m.contains(i, j)).count() >= min_items);
            let ok_i = is.iter().all(|&j| es.iter().filter(|&&i| m.contains(i, j)).count() >= min_editors);
            if ok_e && ok_i && es.len() + is.len() > best.0.len() + best.1.len() {
                best = (es.into_iter().collect(), is.into_iter().collect());
            }
        }
    }
    best
}

/// Peeling oracle: removes one violating editor or item at a time until
/// none is left. Works on a dense table, independent of the library.
pub fn peeling_fixed_point(m: &InteractionMatrix, min_items: usize, min_editors: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let (n, k) = (m.n_editors(), m.n_items());
    let dense: Vec<Vec<bool>> = (0..n).map(|i| (0..k).map(|j| m.contains(i, j)).collect()).collect();
    let mut es: BTreeSet<usize> = (0..n).collect();
    let mut is: BTreeSet<usize> = (0..k).collect();
    loop {
        if let Some(&i) = es.iter().find(|&&i| is.iter().filter(|&&j| dense[i][j]).count() < min_items) {
            es.remove(&i);
            continue;
        }
        if let Some(&j) = is.iter().find(|&&j| es.iter().filter(|&&i| dense[i][j]).count() < min_editors) {
            is.remove(&j);
            continue;
        }
        break;
    }
    if es.is_empty() || is.is_empty() {
        return (BTreeSet::new(), BTreeSet::new());
    }
    (es, is)
}
