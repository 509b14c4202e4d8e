//! Browser bindings over `wdrec-core`. Each operation takes plain strings
//! and numbers and returns a JSON string; the same functions are callable
//! natively.

use std::collections::HashSet;

use rand::Rng as _;
use serde::Serialize;
use wasm_bindgen::prelude::*;
use wdrec_core::eval::{average_recall_at_k, catalog_coverage, precision_at_k, recall_at_k};
use wdrec_core::graph::{train_transr, triple_probability, TransRConfig};
use wdrec_core::ingest::{Triple, TripleStore};
use wdrec_core::math::sigmoid;
use wdrec_core::nmor::{fuse, gate_forward, GateParams};
use wdrec_core::seed;

/// Comma or whitespace separated values.
fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("{what}: cannot parse {s:?}")))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct GateView {
    pub weights: Vec<[f64; 3]>,
    pub means: [f64; 3],
    pub fused: Vec<f64>,
    pub score: Option<f64>,
    pub probability: Option<f64>,
}

/// Gate weights per position for the given channel vectors. The gate is a
/// freshly initialized network whose final layer is redrawn uniformly in
/// `±final_scale` (zero keeps the uniform 1/3 gate). `e` may be empty.
pub fn gate_view(e: &str, v: &str, c: &str, r: &str, hidden: usize, seed: u64, final_scale: f64) -> Result<GateView, String> {
    let v: Vec<f64> = parse_list(v, "v")?;
    let c: Vec<f64> = parse_list(c, "c")?;
    let r: Vec<f64> = parse_list(r, "r")?;
    let e: Vec<f64> = parse_list(e, "e")?;
    if v.is_empty() {
        return Err("v is empty".into());
    }
    if hidden == 0 {
        return Err("hidden must be at least 1".into());
    }
    let mut rng = seed::rng(seed);
    let mut params = GateParams::init(hidden, &mut rng);
    let s = final_scale.abs();
    if s > 0.0 {
        for w in params.layers[2].weights.iter_mut() {
            *w = rng.random_range(-s..=s);
        }
    }
    let w = gate_forward(&v, &c, &r, &params).map_err(|e| e.to_string())?;
    let fused = fuse(&v, &c, &r, &w).map_err(|e| e.to_string())?;
    let score = match e.len() {
        0 => None,
        n if n == fused.len() => Some(e.iter().zip(&fused).map(|(a, b)| a * b).sum::<f64>()),
        n => return Err(format!("e has {n} values, expected {}", fused.len())),
    };
    Ok(GateView {
        weights: (0..w.dim()).map(|k| [w.v[k], w.c[k], w.r[k]]).collect(),
        means: w.means(),
        fused,
        score,
        probability: score.map(sigmoid),
    })
}

#[derive(Debug, Serialize)]
pub struct ListMetrics {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub average_recall: f64,
    pub coverage: f64,
    /// `recall@i` for `i = 1..=k`.
    pub recall_curve: Vec<f64>,
}

/// Metrics of one ranked list of item ids against a relevant set.
/// Coverage is the share of a catalog of `catalog_size` items reached by
/// the top-k.
pub fn list_metrics(ranked: &str, relevant: &str, k: usize, catalog_size: usize) -> Result<ListMetrics, String> {
    let ranked_ids: Vec<String> = parse_list(ranked, "ranked")?;
    let relevant_ids: Vec<String> = parse_list(relevant, "relevant")?;
    let mut index = std::collections::HashMap::new();
    for id in ranked_ids.iter().chain(&relevant_ids) {
        let n = index.len();
        index.entry(id.clone()).or_insert(n);
    }
    if ranked_ids.len() != ranked_ids.iter().collect::<HashSet<_>>().len() {
        return Err("ranked list repeats an item".into());
    }
    let ranked: Vec<usize> = ranked_ids.iter().map(|id| index[id]).collect();
    let relevant: HashSet<usize> = relevant_ids.iter().map(|id| index[id]).collect();
    let err = |e: wdrec_core::Error| e.to_string();
    let top: Vec<usize> = ranked.iter().take(k).copied().collect();
    Ok(ListMetrics {
        k,
        precision: precision_at_k(&ranked, &relevant, k).map_err(err)?,
        recall: recall_at_k(&ranked, &relevant, k).map_err(err)?,
        average_recall: average_recall_at_k(&ranked, &relevant, k).map_err(err)?,
        coverage: catalog_coverage(&[top], catalog_size).map_err(err)?,
        recall_curve: (1..=k)
            .map(|i| recall_at_k(&ranked, &relevant, i))
            .collect::<Result<_, _>>()
            .map_err(err)?,
    })
}

#[derive(Debug, Serialize)]
pub struct ScoredTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub probability: f64,
    pub observed: bool,
}

#[derive(Debug, Serialize)]
pub struct TransRView {
    pub epoch_losses: Vec<f64>,
    /// First two coordinates of each entity vector.
    pub entities: Vec<(String, f64, f64)>,
    /// Every head/tail pair under every relation, observed or not.
    pub triples: Vec<ScoredTriple>,
}

/// Trains TransR on `head relation tail` lines and scores every
/// entity pair under every relation.
pub fn transr_toy(triples: &str, dim: usize, epochs: usize, batch_size: usize, learning_rate: f64, seed: u64) -> Result<TransRView, String> {
    let mut store = TripleStore::new();
    for (n, line) in triples.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [] => {}
            [h, r, t] => {
                store.insert(Triple::new(*h, *r, *t));
            }
            _ => return Err(format!("line {}: expected `head relation tail`", n + 1)),
        }
    }
    if store.entities().len() > 40 {
        return Err("the toy accepts at most 40 entities".into());
    }
    if !(2..=16).contains(&dim) {
        return Err("dim must be between 2 and 16".into());
    }
    let cfg = TransRConfig {
        dim,
        epochs,
        batch_size,
        learning_rate,
        negatives_per_positive: 1,
        seed,
    };
    let (model, report) = train_transr(&store, &cfg).map_err(|e| e.to_string())?;
    let entities = model
        .entity_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.clone(), model.entity(k)[0], model.entity(k)[1]))
        .collect();
    let observed: HashSet<(u32, u32, u32)> = store.indexed().iter().copied().collect();
    let mut scored = Vec::new();
    for (r, rel) in model.relation_ids.iter().enumerate() {
        for (h, head) in model.entity_ids.iter().enumerate() {
            for (t, tail) in model.entity_ids.iter().enumerate() {
                if h == t {
                    continue;
                }
                scored.push(ScoredTriple {
                    head: head.clone(),
                    relation: rel.clone(),
                    tail: tail.clone(),
                    probability: triple_probability(head, rel, tail, &model).map_err(|e| e.to_string())?,
                    observed: observed.contains(&(h as u32, r as u32, t as u32)),
                });
            }
        }
    }
    scored.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(TransRView {
        epoch_losses: report.epoch_losses,
        entities,
        triples: scored,
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gateView)]
pub fn gate_view_js(e: &str, v: &str, c: &str, r: &str, hidden: usize, seed: u32, final_scale: f64) -> Result<String, JsError> {
    to_js(gate_view(e, v, c, r, hidden, seed as u64, final_scale))
}

#[wasm_bindgen(js_name = listMetrics)]
pub fn list_metrics_js(ranked: &str, relevant: &str, k: usize, catalog_size: usize) -> Result<String, JsError> {
    to_js(list_metrics(ranked, relevant, k, catalog_size))
}

#[wasm_bindgen(js_name = transrToy)]
pub fn transr_toy_js(triples: &str, dim: usize, epochs: usize, batch_size: usize, learning_rate: f64, seed: u32) -> Result<String, JsError> {
    to_js(transr_toy(triples, dim, epochs, batch_size, learning_rate, seed as u64))
}
