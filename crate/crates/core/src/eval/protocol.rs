use std::collections::{BTreeMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average_recall_at_k, catalog_coverage, intra_list_diversity, precision_at_k, recall_at_k};
use super::report::{MetricsReport, ReportMeta};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::math::dot_f32;
use crate::mf::{bpr_sample_gradient, EmbeddingMatrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub n_negatives: usize,
    pub precision_k: Vec<usize>,
    pub recall_k: Vec<usize>,
    pub mar_k: Vec<usize>,
    pub diversity_k: usize,
    pub fold_in_steps: usize,
    pub fold_in_learning_rate: f64,
    pub fold_in_l2: f64,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_negatives: 200,
            precision_k: vec![5, 10],
            recall_k: vec![50, 100, 200],
            mar_k: vec![5, 10],
            diversity_k: 10,
            fold_in_steps: 20,
            fold_in_learning_rate: 0.05,
            fold_in_l2: 1e-4,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_negatives == 0 {
            return Err(Error::InvalidArgument("n_negatives must be at least 1".into()));
        }
        let ks = self.precision_k.iter().chain(&self.recall_k).chain(&self.mar_k);
        if ks.chain(std::iter::once(&self.diversity_k)).any(|&k| k == 0) {
            return Err(Error::InvalidArgument("every k must be at least 1".into()));
        }
        if !(self.fold_in_learning_rate > 0.0) || self.fold_in_l2 < 0.0 {
            return Err(Error::InvalidArgument("fold-in learning rate must be positive, l2 non-negative".into()));
        }
        Ok(())
    }

    pub fn fold_in(&self, seed: u64) -> FoldInConfig {
        FoldInConfig {
            steps: self.fold_in_steps,
            learning_rate: self.fold_in_learning_rate,
            l2: self.fold_in_l2,
            seed,
        }
    }

    /// Metric names in report order.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        names.extend(self.precision_k.iter().map(|k| format!("precision@{k}")));
        names.extend(self.recall_k.iter().map(|k| format!("recall@{k}")));
        names.extend(self.mar_k.iter().map(|k| format!("mar@{k}")));
        names.push(format!("diversity@{}", self.diversity_k));
        names.push(format!("coverage@{}", self.diversity_k));
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldInConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

/// Fits one editor vector by BPR steps against frozen item vectors. Each
/// step visits every positive once, paired with a uniform item outside
/// `excluded` (sorted item indices).
pub fn fold_in_editor(
    positives: &[usize],
    items: &EmbeddingMatrix,
    excluded: &[u32],
    init: &[f64],
    cfg: &FoldInConfig,
) -> Result<Vec<f64>> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("fold-in needs at least one positive item".into()));
    }
    if init.len() != items.dim() {
        return Err(Error::DimensionMismatch {
            expected: items.dim(),
            actual: init.len(),
        });
    }
    if let Some(&j) = positives.iter().find(|&&j| j >= items.rows()) {
        return Err(Error::InvalidArgument(format!("positive item index {j} out of range")));
    }
    let mut e = init.to_vec();
    if excluded.len() >= items.rows() {
        return Ok(e);
    }
    let mut rng = seed::rng(cfg.seed);
    for _ in 0..cfg.steps {
        for &p in positives {
            let n = loop {
                let j = rng.random_range(0..items.rows());
                if excluded.binary_search(&(j as u32)).is_err() {
                    break j;
                }
            };
            let grad = bpr_sample_gradient(&e, &items.row_f64(p), &items.row_f64(n), cfg.l2);
            for (x, g) in e.iter_mut().zip(&grad.editor) {
                *x -= cfg.learning_rate * g;
            }
        }
    }
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence("non-finite editor vector during fold-in".into()));
    }
    Ok(e)
}

/// Interaction data seen by the protocol. `seen` holds everything outside
/// the test split (train and validation); all matrices and `content` share
/// the catalog order of `test`.
pub struct EvalData<'a> {
    pub seen: &'a InteractionMatrix,
    pub test: &'a InteractionMatrix,
    pub content: &'a EmbeddingMatrix,
    pub dataset: String,
}

impl EvalData<'_> {
    fn check(&self) -> Result<()> {
        if self.seen.editors() != self.test.editors() || self.seen.items() != self.test.items() {
            return Err(Error::InvalidArgument("seen and test matrices must share an index space".into()));
        }
        if self.content.ids() != self.test.items() {
            return Err(Error::InvalidArgument("content matrix must follow the catalog order".into()));
        }
        Ok(())
    }
}

/// Item vectors used for scoring (catalog order) and optional starting
/// editor vectors keyed by editor id. Editors without a row start at zero.
pub struct ModelBundle {
    pub name: String,
    pub items: EmbeddingMatrix,
    pub editor_init: Option<EmbeddingMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditorEvaluation {
    pub editor: String,
    pub fold_in_items: Vec<usize>,
    pub relevant: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Candidates in ranked order.
    pub ranked: Vec<usize>,
    pub metrics: BTreeMap<String, f64>,
    pub diversity: Option<f64>,
}

/// Runs the half/half protocol for one editor. Returns `None` (logged) when
/// the editor has fewer than two test items.
pub fn evaluate_editor(
    editor: usize,
    model: &ModelBundle,
    data: &EvalData<'_>,
    cfg: &ProtocolConfig,
) -> Result<Option<EditorEvaluation>> {
    let editor_id = &data.test.editors()[editor];
    let mut test_items: Vec<usize> = data.test.row(editor).iter().map(|&j| j as usize).collect();
    if test_items.len() < 2 {
        log::info!("editor {editor_id} skipped: {} test items", test_items.len());
        return Ok(None);
    }
    let mut rng = seed::rng(seed::sub_seed(cfg.seed, editor_id));
    test_items.shuffle(&mut rng);
    let half = test_items.len() / 2;
    let relevant = test_items.split_off(half);
    let mut fold_in_items = test_items;
    fold_in_items.sort_unstable();

    // Negatives for fold-in come from outside what the editor is known to
    // have touched before the second half.
    let mut excluded: Vec<u32> = data.seen.row(editor).to_vec();
    excluded.extend(fold_in_items.iter().map(|&j| j as u32));
    excluded.sort_unstable();
    excluded.dedup();

    let init = model
        .editor_init
        .as_ref()
        .and_then(|m| m.get(editor_id))
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .unwrap_or_else(|| vec![0.0; model.items.dim()]);
    let fold_cfg = cfg.fold_in(seed::sub_seed(cfg.seed, &format!("fold-in/{editor_id}")));
    let e = fold_in_editor(&fold_in_items, &model.items, &excluded, &init, &fold_cfg)?;
    let e32: Vec<f32> = e.iter().map(|&x| x as f32).collect();

    let touched: HashSet<u32> = data
        .seen
        .row(editor)
        .iter()
        .chain(data.test.row(editor))
        .copied()
        .collect();
    let pool: Vec<usize> = (0..data.test.n_items()).filter(|j| !touched.contains(&(*j as u32))).collect();
    let n_neg = cfg.n_negatives.min(pool.len());
    if n_neg < cfg.n_negatives {
        log::debug!("editor {editor_id}: only {n_neg} never-edited items available as negatives");
    }
    let mut negatives: Vec<usize> = index::sample(&mut rng, pool.len(), n_neg).into_iter().map(|k| pool[k]).collect();
    negatives.sort_unstable();

    let mut scored: Vec<(usize, f64)> = relevant
        .iter()
        .chain(&negatives)
        .map(|&j| (j, dot_f32(&e32, model.items.row(j))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let ranked: Vec<usize> = scored.into_iter().map(|(j, _)| j).collect();

    let rel: HashSet<usize> = relevant.iter().copied().collect();
    let mut metrics = BTreeMap::new();
    for &k in &cfg.precision_k {
        metrics.insert(format!("precision@{k}"), precision_at_k(&ranked, &rel, k)?);
    }
    for &k in &cfg.recall_k {
        metrics.insert(format!("recall@{k}"), recall_at_k(&ranked, &rel, k)?);
    }
    for &k in &cfg.mar_k {
        metrics.insert(format!("mar@{k}"), average_recall_at_k(&ranked, &rel, k)?);
    }
    let top: Vec<usize> = ranked.iter().take(cfg.diversity_k).copied().collect();
    let diversity = match intra_list_diversity(&top, data.content) {
        Ok(d) => Some(d),
        Err(err) => {
            log::debug!("editor {editor_id}: diversity not defined ({err})");
            None
        }
    };
    let mut relevant = relevant;
    relevant.sort_unstable();
    Ok(Some(EditorEvaluation {
        editor: editor_id.clone(),
        fold_in_items,
        relevant,
        negatives,
        ranked,
        metrics,
        diversity,
    }))
}

/// Evaluates every editor with test items, in parallel, and reduces in
/// editor order.
pub fn evaluate(
    model: &ModelBundle,
    data: &EvalData<'_>,
    cfg: &ProtocolConfig,
    keep_per_editor: bool,
) -> Result<MetricsReport> {
    cfg.validate()?;
    data.check()?;
    if model.items.ids() != data.test.items() {
        return Err(Error::InvalidArgument(format!(
            "model {} item vectors must follow the catalog order",
            model.name
        )));
    }
    let results: Vec<Option<EditorEvaluation>> = (0..data.test.n_editors())
        .into_par_iter()
        .filter(|&i| !data.test.row(i).is_empty())
        .map(|i| evaluate_editor(i, model, data, cfg))
        .collect::<Result<_>>()?;
    let evaluated: Vec<EditorEvaluation> = results.into_iter().flatten().collect();
    if evaluated.is_empty() {
        return Err(Error::EmptyInput("no editor has two or more test items"));
    }

    let n = evaluated.len() as f64;
    let mut metrics = BTreeMap::new();
    for name in evaluated[0].metrics.keys() {
        let total: f64 = evaluated.iter().map(|ev| ev.metrics[name]).sum();
        metrics.insert(name.clone(), total / n);
    }
    let diversities: Vec<f64> = evaluated.iter().filter_map(|ev| ev.diversity).collect();
    let diversity = if diversities.is_empty() {
        0.0
    } else {
        diversities.iter().sum::<f64>() / diversities.len() as f64
    };
    metrics.insert(format!("diversity@{}", cfg.diversity_k), diversity);
    let lists: Vec<Vec<usize>> = evaluated
        .iter()
        .map(|ev| ev.ranked.iter().take(cfg.diversity_k).copied().collect())
        .collect();
    metrics.insert(
        format!("coverage@{}", cfg.diversity_k),
        catalog_coverage(&lists, data.test.n_items())?,
    );

    let per_editor = keep_per_editor.then(|| {
        evaluated
            .iter()
            .map(|ev| {
                let mut m = ev.metrics.clone();
                if let Some(d) = ev.diversity {
                    m.insert(format!("diversity@{}", cfg.diversity_k), d);
                }
                (ev.editor.clone(), m)
            })
            .collect()
    });
    log::info!("model {}: evaluated {} editors", model.name, evaluated.len());
    Ok(MetricsReport {
        metrics,
        meta: ReportMeta {
            seed: cfg.seed,
            dataset: data.dataset.clone(),
            model: model.name.clone(),
        },
        per_editor,
    })
}
