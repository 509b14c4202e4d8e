use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::corrupt_one;
use crate::error::{Error, Result};
use crate::ingest::TripleStore;
use crate::math::{quantize, sigmoid, softplus};
use crate::mf::EmbeddingMatrix;
use crate::seed;
use crate::store::{self, ProjectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransRConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for TransRConfig {
    fn default() -> Self {
        TransRConfig {
            dim: 1024,
            epochs: 10,
            batch_size: 128,
            learning_rate: 0.01,
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

/// Entity and relation vectors, one `dim × dim` projection per relation
/// (row-major, applied as `x · M`), and the score bias `b` of
/// `P(true) = σ(b − d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransRModel {
    pub dim: usize,
    pub entity_ids: Vec<String>,
    pub relation_ids: Vec<String>,
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
    pub projections: Vec<f64>,
    pub score_bias: f64,
    entity_index: HashMap<String, usize>,
    relation_index: HashMap<String, usize>,
}

impl TransRModel {
    pub fn new(
        dim: usize,
        entity_ids: Vec<String>,
        relation_ids: Vec<String>,
        entities: Vec<f64>,
        relations: Vec<f64>,
        projections: Vec<f64>,
        score_bias: f64,
    ) -> Result<Self> {
        let (ne, nr) = (entity_ids.len(), relation_ids.len());
        if entities.len() != ne * dim || relations.len() != nr * dim || projections.len() != nr * dim * dim {
            return Err(Error::InvalidArgument("TransR parameter shapes do not match ids and dim".into()));
        }
        let entity_index = entity_ids.iter().enumerate().map(|(k, id)| (id.clone(), k)).collect();
        let relation_index = relation_ids.iter().enumerate().map(|(k, id)| (id.clone(), k)).collect();
        Ok(TransRModel {
            dim,
            entity_ids,
            relation_ids,
            entities,
            relations,
            projections,
            score_bias,
            entity_index,
            relation_index,
        })
    }

    pub fn entity(&self, e: usize) -> &[f64] {
        &self.entities[e * self.dim..(e + 1) * self.dim]
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        &self.relations[r * self.dim..(r + 1) * self.dim]
    }

    pub fn projection(&self, r: usize) -> &[f64] {
        let z2 = self.dim * self.dim;
        &self.projections[r * z2..(r + 1) * z2]
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entity_index.get(id).copied()
    }

    pub fn relation_index(&self, id: &str) -> Option<usize> {
        self.relation_index.get(id).copied()
    }

    fn lookup(&self, h: &str, r: &str, t: &str) -> Result<(usize, usize, usize)> {
        let ent = |id: &str| {
            self.entity_index(id).ok_or_else(|| Error::UnknownId {
                kind: "entity",
                id: id.to_string(),
            })
        };
        let rel = self.relation_index(r).ok_or_else(|| Error::UnknownId {
            kind: "relation",
            id: r.to_string(),
        })?;
        Ok((ent(h)?, rel, ent(t)?))
    }

    /// Residual `h·M_r + v_r − t·M_r` for indexed ids.
    fn residual(&self, h: usize, r: usize, t: usize) -> Vec<f64> {
        let z = self.dim;
        let m = self.projection(r);
        let (hv, tv, rv) = (self.entity(h), self.entity(t), self.relation(r));
        let mut s = rv.to_vec();
        for a in 0..z {
            let diff = hv[a] - tv[a];
            if diff != 0.0 {
                let row = &m[a * z..(a + 1) * z];
                for k in 0..z {
                    s[k] += diff * row[k];
                }
            }
        }
        s
    }

    pub fn distance_indexed(&self, h: usize, r: usize, t: usize) -> f64 {
        self.residual(h, r, t).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `‖h·M_r + v_r − t·M_r‖₂`.
pub fn transr_distance(h: &str, r: &str, t: &str, model: &TransRModel) -> Result<f64> {
    let (h, r, t) = model.lookup(h, r, t)?;
    Ok(model.distance_indexed(h, r, t))
}

/// `σ(b − d(h, r, t))`.
pub fn triple_probability(h: &str, r: &str, t: &str, model: &TransRModel) -> Result<f64> {
    Ok(sigmoid(model.score_bias - transr_distance(h, r, t, model)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransRGradient {
    pub loss: f64,
    pub head: Vec<f64>,
    pub tail: Vec<f64>,
    pub relation: Vec<f64>,
    /// Row-major `dim × dim`.
    pub projection: Vec<f64>,
    pub bias: f64,
}

/// Binary cross-entropy of one labelled triple and its gradients. When
/// `h == t` the head and tail gradients both apply to the same row.
pub fn transr_example_gradient(model: &TransRModel, h: usize, r: usize, t: usize, label: bool) -> TransRGradient {
    let z = model.dim;
    let s = model.residual(h, r, t);
    let d = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let x = model.score_bias - d;
    let y = if label { 1.0 } else { 0.0 };
    let loss = if label { softplus(-x) } else { softplus(x) };
    // dL/dx = σ(x) − y, x = b − d
    let gx = sigmoid(x) - y;
    let gd = -gx;
    let unit: Vec<f64> = if d > 0.0 { s.iter().map(|v| v / d).collect() } else { vec![0.0; z] };
    let m = model.projection(r);
    let (hv, tv) = (model.entity(h), model.entity(t));
    let mut head = vec![0.0; z];
    for a in 0..z {
        let row = &m[a * z..(a + 1) * z];
        head[a] = gd * row.iter().zip(&unit).map(|(m, u)| m * u).sum::<f64>();
    }
    let tail = head.iter().map(|g| -g).collect();
    let relation = unit.iter().map(|u| gd * u).collect();
    let mut projection = vec![0.0; z * z];
    for a in 0..z {
        let diff = hv[a] - tv[a];
        for k in 0..z {
            projection[a * z + k] = gd * diff * unit[k];
        }
    }
    TransRGradient {
        loss,
        head,
        tail,
        relation,
        projection,
        bias: gx,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransRReport {
    pub epoch_losses: Vec<f64>,
}

fn renormalize(entities: &mut [f64], dim: usize) {
    for row in entities.chunks_mut(dim) {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Minibatch SGD on binary cross-entropy over positives and corrupted
/// negatives. The batch gradient is the sum over its examples, so the
/// learning rate acts per triple; entity vectors are rescaled to norm ≤ 1
/// after every epoch.
pub fn train_transr(triples: &TripleStore, cfg: &TransRConfig) -> Result<(TransRModel, TransRReport)> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("triple store is empty"));
    }
    if cfg.dim == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("invalid TransR configuration".into()));
    }
    let z = cfg.dim;
    let (ne, nr) = (triples.entities().len(), triples.relations().len());
    let mut rng = seed::rng(cfg.seed);
    let bound = 6.0 / (z as f64).sqrt();
    let mut entities: Vec<f64> = (0..ne * z).map(|_| rng.random_range(-bound..bound)).collect();
    renormalize(&mut entities, z);
    let mut relations: Vec<f64> = (0..nr * z).map(|_| rng.random_range(-bound..bound)).collect();
    renormalize(&mut relations, z);
    let mut projections = vec![0.0; nr * z * z];
    for r in 0..nr {
        for a in 0..z {
            for k in 0..z {
                let noise = rng.random_range(-0.01..=0.01);
                projections[r * z * z + a * z + k] = if a == k { 1.0 + noise } else { noise };
            }
        }
    }
    let mut model = TransRModel::new(
        z,
        triples.entities().to_vec(),
        triples.relations().to_vec(),
        entities,
        relations,
        projections,
        1.0,
    )?;

    let mut order: Vec<(u32, u32, u32)> = triples.indexed().to_vec();
    let mut report = TransRReport { epoch_losses: Vec::new() };
    let mut ge = vec![0.0; ne * z];
    let mut gr = vec![0.0; nr * z];
    let mut gm = vec![0.0; nr * z * z];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut examples = Vec::with_capacity(batch.len() * (1 + cfg.negatives_per_positive));
            for &pos in batch {
                examples.push((pos, true));
                for _ in 0..cfg.negatives_per_positive {
                    if let Some(neg) = corrupt_one(triples, pos, &mut rng)? {
                        examples.push((neg, false));
                    }
                }
            }
            ge.iter_mut().for_each(|g| *g = 0.0);
            gr.iter_mut().for_each(|g| *g = 0.0);
            gm.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            let mut touched_e = Vec::new();
            let mut touched_r = Vec::new();
            for &((h, r, t), label) in &examples {
                let (h, r, t) = (h as usize, r as usize, t as usize);
                let g = transr_example_gradient(&model, h, r, t, label);
                total += g.loss;
                count += 1;
                for k in 0..z {
                    ge[h * z + k] += g.head[k];
                    ge[t * z + k] += g.tail[k];
                    gr[r * z + k] += g.relation[k];
                }
                for (acc, v) in gm[r * z * z..(r + 1) * z * z].iter_mut().zip(&g.projection) {
                    *acc += v;
                }
                gb += g.bias;
                touched_e.extend([h, t]);
                touched_r.push(r);
            }
            let step = cfg.learning_rate;
            touched_e.sort_unstable();
            touched_e.dedup();
            touched_r.sort_unstable();
            touched_r.dedup();
            for &e in &touched_e {
                for k in 0..z {
                    model.entities[e * z + k] -= step * ge[e * z + k];
                }
            }
            for &r in &touched_r {
                for k in 0..z {
                    model.relations[r * z + k] -= step * gr[r * z + k];
                }
                for k in 0..z * z {
                    model.projections[r * z * z + k] -= step * gm[r * z * z + k];
                }
            }
            model.score_bias -= step * gb;
        }
        let mean = total / count.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence(format!("TransR loss is {mean} at epoch {}", epoch + 1)));
        }
        log::debug!("transr epoch {} loss {mean:.6}", epoch + 1);
        report.epoch_losses.push(mean);
        renormalize(&mut model.entities, z);
    }
    quantize(&mut model.entities);
    quantize(&mut model.relations);
    quantize(&mut model.projections);
    model.score_bias = model.score_bias as f32 as f64;
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationalVector {
    pub values: Vec<f64>,
    /// Set when the item is not in the graph and the zero vector was returned.
    pub fallback: bool,
}

pub fn relational_repr(item_id: &str, model: &TransRModel) -> RelationalVector {
    match model.entity_index(item_id) {
        Some(e) => RelationalVector {
            values: model.entity(e).to_vec(),
            fallback: false,
        },
        None => RelationalVector {
            values: vec![0.0; model.dim],
            fallback: true,
        },
    }
}

/// Relational vectors for a catalog, with the number of zero fallbacks.
pub fn relational_matrix(model: &TransRModel, catalog: &[String]) -> Result<(EmbeddingMatrix, usize)> {
    let mut data = Vec::with_capacity(catalog.len() * model.dim);
    let mut missing = 0;
    for id in catalog {
        let r = relational_repr(id, model);
        missing += r.fallback as usize;
        data.extend(r.values);
    }
    Ok((EmbeddingMatrix::from_f64(catalog.to_vec(), model.dim, &data)?, missing))
}

/// Writes `<prefix>.entities.bin`, `<prefix>.relations.bin` (embedding
/// format), `<prefix>.projections.bin` and `<prefix>.bias.json`.
pub fn save_transr(model: &TransRModel, dir: &Path, prefix: &str) -> Result<()> {
    let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
    store::write_embeddings(
        &EmbeddingMatrix::new(model.entity_ids.clone(), model.dim, f32s(&model.entities))?,
        dir.join(format!("{prefix}.entities.bin")),
    )?;
    store::write_embeddings(
        &EmbeddingMatrix::new(model.relation_ids.clone(), model.dim, f32s(&model.relations))?,
        dir.join(format!("{prefix}.relations.bin")),
    )?;
    store::write_projections(
        &ProjectionSet {
            relation_ids: model.relation_ids.clone(),
            dim: model.dim,
            data: f32s(&model.projections),
        },
        dir.join(format!("{prefix}.projections.bin")),
    )?;
    let bias = dir.join(format!("{prefix}.bias.json"));
    let json = serde_json::json!({ "score_bias": model.score_bias as f32 });
    std::fs::write(&bias, format!("{json}\n")).map_err(|e| Error::io(&bias, e))
}

pub fn load_transr(dir: &Path, prefix: &str) -> Result<TransRModel> {
    let ents = store::read_embeddings(dir.join(format!("{prefix}.entities.bin")))?;
    let rels = store::read_embeddings(dir.join(format!("{prefix}.relations.bin")))?;
    let proj = store::read_projections(dir.join(format!("{prefix}.projections.bin")))?;
    let bias_path = dir.join(format!("{prefix}.bias.json"));
    let text = std::fs::read_to_string(&bias_path).map_err(|e| Error::io(&bias_path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let bias = v["score_bias"]
        .as_f64()
        .ok_or_else(|| Error::Config(format!("{}: missing score_bias", bias_path.display())))?;
    if proj.relation_ids != rels.ids() || proj.dim != ents.dim() || rels.dim() != ents.dim() {
        return Err(Error::InvalidArgument("TransR checkpoint parts disagree".into()));
    }
    TransRModel::new(
        ents.dim(),
        ents.ids().to_vec(),
        rels.ids().to_vec(),
        ents.to_f64(),
        rels.to_f64(),
        proj.data.iter().map(|&x| x as f64).collect(),
        bias as f32 as f64,
    )
}
