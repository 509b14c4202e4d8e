use std::collections::{BTreeMap, HashMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::TokenizedDoc;
use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WordVectorConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    /// Initial learning rate, decayed linearly towards zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WordVectorConfig {
    fn default() -> Self {
        WordVectorConfig {
            dim: 1024,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 1,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

/// Word → row map plus input (`vectors`) and output (`context`) embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub vocabulary: HashMap<String, usize>,
    pub words: Vec<String>,
    pub dim: usize,
    pub vectors: Vec<f64>,
    pub context: Vec<f64>,
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl WordVectors {
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary
            .get(word)
            .map(|&r| &self.vectors[r * self.dim..(r + 1) * self.dim])
    }

    pub fn context_of(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary
            .get(word)
            .map(|&r| &self.context[r * self.dim..(r + 1) * self.dim])
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss `−ln σ(u_ctx·v) − Σ ln σ(−u_neg·v)` of one (center, context) pair
/// against sampled negatives, with gradients for every vector involved.
pub fn sgns_pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let dim = center.len();
    let x = dot(context, center);
    let gp = sigmoid(x) - 1.0;
    let mut loss = softplus(-x);
    let mut g_center: Vec<f64> = context.iter().map(|c| gp * c).collect();
    let g_context: Vec<f64> = center.iter().map(|c| gp * c).collect();
    let mut g_neg = Vec::with_capacity(negatives.len());
    for u in negatives {
        let xn = dot(u, center);
        let gn = sigmoid(xn);
        loss += softplus(xn);
        for k in 0..dim {
            g_center[k] += gn * u[k];
        }
        g_neg.push(center.iter().map(|c| gn * c).collect());
    }
    SgnsGradient {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_neg,
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Skip-gram with negative sampling over the documents (one document = one
/// sentence). Vocabulary is ordered by descending count then word, so the
/// result depends only on the corpus and the seed.
pub fn train_word_vectors(docs: &[TokenizedDoc], cfg: &WordVectorConfig) -> Result<WordVectors> {
    if cfg.dim == 0 || cfg.window == 0 || cfg.min_count == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("invalid word vector configuration".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        for t in &doc.tokens {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    if vocab.is_empty() {
        return Err(Error::EmptyInput("word vector vocabulary is empty"));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words: Vec<String> = vocab.iter().map(|(w, _)| w.to_string()).collect();
    let vocabulary: HashMap<String, usize> = words.iter().enumerate().map(|(k, w)| (w.clone(), k)).collect();
    let noise = NoiseTable::new(&vocab.iter().map(|&(_, c)| c).collect::<Vec<_>>());

    let sentences: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| vocabulary.get(t).copied()).collect())
        .collect();
    let dim = cfg.dim;
    let mut rng = seed::rng(cfg.seed);
    let bound = 0.5 / dim as f64;
    let mut vectors: Vec<f64> = (0..words.len() * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let mut context = vec![0.0; words.len() * dim];

    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| (0..s.len()).map(|p| window_span(p, s.len(), cfg.window).len() - 1).sum::<usize>())
        .sum();
    let total_steps = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut neg_ids = Vec::with_capacity(cfg.negatives);
    let mut grad_center = vec![0.0; dim];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for sentence in &sentences {
            for (p, &center) in sentence.iter().enumerate() {
                for q in window_span(p, sentence.len(), cfg.window) {
                    if q == p {
                        continue;
                    }
                    let target = sentence[q];
                    let lr = cfg.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                    step += 1;
                    neg_ids.clear();
                    while neg_ids.len() < cfg.negatives {
                        let n = noise.sample(&mut rng);
                        if n != target || words.len() == 1 {
                            neg_ids.push(n);
                        }
                    }
                    let v = &vectors[center * dim..(center + 1) * dim];
                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    for (label, &w) in std::iter::once((true, &target)).chain(neg_ids.iter().map(|n| (false, n))) {
                        let u = &mut context[w * dim..(w + 1) * dim];
                        let x = dot(u, v);
                        let g = sigmoid(x) - if label { 1.0 } else { 0.0 };
                        epoch_loss += if label { softplus(-x) } else { softplus(x) };
                        for k in 0..dim {
                            grad_center[k] += g * u[k];
                            u[k] -= lr * g * v[k];
                        }
                    }
                    let v = &mut vectors[center * dim..(center + 1) * dim];
                    for k in 0..dim {
                        v[k] -= lr * grad_center[k];
                    }
                }
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence(format!("word vector loss is {epoch_loss} at epoch {}", epoch + 1)));
        }
        let mean = epoch_loss / (pairs_per_epoch.max(1) * (1 + cfg.negatives)) as f64;
        log::debug!("word vectors epoch {} mean loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(WordVectors {
        vocabulary,
        words,
        dim,
        vectors,
        context,
        epoch_losses,
    })
}

fn window_span(p: usize, len: usize, window: usize) -> std::ops::Range<usize> {
    p.saturating_sub(window)..(p + window + 1).min(len)
}
