//! End-to-end runs on a corpus: fit every representation, build the model
//! variants, and evaluate them under the per-editor protocol.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, fold_in_editor, sparsity_slices, EvalData, FoldInConfig, MetricsReport, ModelBundle, ProtocolConfig};
use crate::graph::{relational_matrix, train_transr, TransRConfig};
use crate::ingest::{build_matrix, split_holdout, InteractionMatrix, ItemContentRecord, SplitSpec, TripleStore};
use crate::mf::{train_bpr, BprConfig, EmbeddingMatrix};
use crate::nmor::{fused_matrix, train_nmor_masked, GateParams, NmorConfig};
use crate::seed;
use crate::synth::{generate, SynthConfig};
use crate::text::{content_matrix, preprocess, train_word_vectors, WordVectorConfig, DEFAULT_STOPWORDS};

/// Model variants in ablation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Item-centric vectors only (BPR-MF).
    Cf,
    /// Gate over edit and content vectors; relational channel zeroed.
    Content,
    /// Gate over all three channels.
    Full,
    /// All three channels with fixed equal weights.
    Unweighted,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Cf, Variant::Content, Variant::Full, Variant::Unweighted];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cf => "cf",
            Variant::Content => "content",
            Variant::Full => "full",
            Variant::Unweighted => "unweighted",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?} (cf, content, full, unweighted)")))
    }
}

/// Editor fold-in used to place training editors in a fused item space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditorFitConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for EditorFitConfig {
    fn default() -> Self {
        EditorFitConfig {
            steps: 20,
            learning_rate: 0.05,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub split: SplitSpec,
    pub bpr: BprConfig,
    pub word_vectors: WordVectorConfig,
    pub transr: TransRConfig,
    pub nmor: NmorConfig,
    pub editor_fit: EditorFitConfig,
    pub protocol: ProtocolConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk(32, 0)
    }
}

impl ExperimentConfig {
    /// Small-dimension settings for synthetic desk-scale runs.
    pub fn desk(dim: usize, global_seed: u64) -> Self {
        let mut cfg = ExperimentConfig {
            dim,
            split: SplitSpec::default(),
            bpr: BprConfig {
                dim,
                epochs: 30,
                ..BprConfig::default()
            },
            word_vectors: WordVectorConfig {
                dim,
                ..WordVectorConfig::default()
            },
            transr: TransRConfig {
                dim,
                ..TransRConfig::default()
            },
            nmor: NmorConfig {
                hidden: 8,
                batch_size: 64,
                learning_rate: 0.01,
                epochs: 10,
                ..NmorConfig::default()
            },
            editor_fit: EditorFitConfig::default(),
            protocol: ProtocolConfig::default(),
        };
        cfg.reseed(global_seed);
        cfg
    }

    /// Derives every component seed from `global`.
    pub fn reseed(&mut self, global: u64) {
        self.split.seed = seed::sub_seed(global, "split");
        self.bpr.seed = seed::sub_seed(global, "bpr");
        self.word_vectors.seed = seed::sub_seed(global, "word_vectors");
        self.transr.seed = seed::sub_seed(global, "transr");
        self.nmor.seed = seed::sub_seed(global, "nmor");
        self.protocol.seed = seed::sub_seed(global, "protocol");
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.bpr.dim, self.word_vectors.dim, self.transr.dim];
        if dims.iter().any(|&d| d != self.dim) {
            return Err(Error::Config(format!(
                "dimension mismatch: dim = {}, bpr = {}, word_vectors = {}, transr = {}",
                self.dim, dims[0], dims[1], dims[2]
            )));
        }
        self.split.validate()?;
        self.bpr.validate()?;
        self.protocol.validate()
    }
}

/// Fitted inputs shared by all variants.
pub struct Representations {
    pub dataset: String,
    pub train: InteractionMatrix,
    /// Train plus validation: everything outside the test split.
    pub seen: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub editors: EmbeddingMatrix,
    pub v: EmbeddingMatrix,
    pub c: EmbeddingMatrix,
    pub r: EmbeddingMatrix,
}

/// Content vectors in `catalog` order, trained on every item's text.
pub fn fit_content(content: &[ItemContentRecord], catalog: &[String], cfg: &WordVectorConfig) -> Result<EmbeddingMatrix> {
    let stop: HashSet<String> = DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect();
    let docs: Vec<_> = content
        .iter()
        .map(|r| preprocess(&r.item_id, &r.label, &r.description, &stop))
        .collect();
    let wv = train_word_vectors(&docs, cfg)?;
    let (c, _) = content_matrix(&docs, &wv)?;
    let (aligned, missing) = c.align_to(catalog);
    if missing > 0 {
        log::warn!("{missing} catalog items have no content record");
    }
    Ok(aligned)
}

/// Relational vectors in `catalog` order.
pub fn fit_relations(relations: &TripleStore, catalog: &[String], cfg: &TransRConfig) -> Result<EmbeddingMatrix> {
    let (model, report) = train_transr(relations, cfg)?;
    log::info!("transr losses {:?}", report.epoch_losses);
    let (r, missing) = relational_matrix(&model, catalog)?;
    log::info!("{missing} catalog items outside the relation graph");
    Ok(r)
}

impl Representations {
    /// Splits `matrix`, then fits BPR on the training part. `c` and `r`
    /// must already follow the catalog order of `matrix`.
    pub fn fit(
        dataset: &str,
        matrix: &InteractionMatrix,
        c: EmbeddingMatrix,
        r: EmbeddingMatrix,
        cfg: &ExperimentConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if c.ids() != matrix.items() || r.ids() != matrix.items() {
            return Err(Error::InvalidArgument("content and relational rows must follow the catalog".into()));
        }
        let split = split_holdout(matrix, &cfg.split)?;
        let seen = split.train.union(&split.validation)?;
        let factors = train_bpr(&split.train, &cfg.bpr)?;
        log::info!(
            "bpr probe loss {:.4} -> {:.4}",
            factors.loss_log[0],
            factors.loss_log.last().copied().unwrap_or(f64::NAN)
        );
        Ok(Representations {
            dataset: dataset.to_string(),
            train: split.train,
            seen,
            validation: split.validation,
            test: split.test,
            editors: factors.editors,
            v: factors.items,
            c,
            r,
        })
    }

    /// Assembles representations fitted elsewhere. `validation` and `test`
    /// must share the index space of `train`; `editors` and `v` are aligned
    /// to it by id, `c` and `r` must follow its catalog.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dataset: &str,
        train: InteractionMatrix,
        validation: InteractionMatrix,
        test: InteractionMatrix,
        editors: &EmbeddingMatrix,
        v: &EmbeddingMatrix,
        c: EmbeddingMatrix,
        r: EmbeddingMatrix,
    ) -> Result<Self> {
        if c.ids() != train.items() || r.ids() != train.items() {
            return Err(Error::InvalidArgument("content and relational rows must follow the catalog".into()));
        }
        let seen = train.union(&validation)?;
        if seen.editors() != test.editors() || seen.items() != test.items() {
            return Err(Error::InvalidArgument("test split must share the training index space".into()));
        }
        let (editors, missing_e) = editors.align_to(train.editors());
        let (v, missing_v) = v.align_to(train.items());
        if missing_e + missing_v > 0 {
            log::warn!("{missing_e} editors and {missing_v} items have no factor row; zero vectors used");
        }
        Ok(Representations {
            dataset: dataset.to_string(),
            train,
            seen,
            validation,
            test,
            editors,
            v,
            c,
            r,
        })
    }

    pub fn eval_data(&self) -> EvalData<'_> {
        EvalData {
            seen: &self.seen,
            test: &self.test,
            content: &self.c,
            dataset: self.dataset.clone(),
        }
    }

    fn zero_r(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::zeros(self.r.ids().to_vec(), self.r.dim())
    }
}

/// Editor vectors obtained by folding each editor's `rows` into frozen
/// `items`, starting from zero.
pub fn fit_editors(rows: &InteractionMatrix, items: &EmbeddingMatrix, cfg: &EditorFitConfig, seed: u64) -> Result<EmbeddingMatrix> {
    let dim = items.dim();
    let vectors: Vec<Vec<f64>> = (0..rows.n_editors())
        .into_par_iter()
        .map(|i| {
            let row = rows.row(i);
            if row.is_empty() {
                return Ok(vec![0.0; dim]);
            }
            let positives: Vec<usize> = row.iter().map(|&j| j as usize).collect();
            let fold = FoldInConfig {
                steps: cfg.steps,
                learning_rate: cfg.learning_rate,
                l2: cfg.l2,
                seed: seed::sub_seed(seed, &rows.editors()[i]),
            };
            fold_in_editor(&positives, items, row, &vec![0.0; dim], &fold)
        })
        .collect::<Result<_>>()?;
    EmbeddingMatrix::from_f64(rows.editors().to_vec(), dim, &vectors.concat())
}

/// A fused variant: gate parameters plus its item and editor vectors.
pub struct FusedModel {
    pub gate: GateParams,
    pub items: EmbeddingMatrix,
    pub editors: EmbeddingMatrix,
    pub gate_losses: Vec<f64>,
}

/// Fits the gate for one channel set. Editors are first placed against the
/// equal-weight fusion, the gate is trained on the seen interactions, and
/// editors are then refit against the gated fusion.
pub fn fit_fused(
    reps: &Representations,
    c: &EmbeddingMatrix,
    r: &EmbeddingMatrix,
    cfg: &ExperimentConfig,
    learn_gate: bool,
    name: &str,
) -> Result<FusedModel> {
    let mut init_rng = seed::rng(seed::sub_seed(cfg.nmor.seed, name));
    let uniform = GateParams::init(cfg.nmor.hidden, &mut init_rng);
    let fit_seed = seed::sub_seed(cfg.nmor.seed, &format!("{name}/editors"));
    let base_items = fused_matrix(&reps.v, c, r, &uniform)?;
    let base_editors = fit_editors(&reps.train, &base_items, &cfg.editor_fit, fit_seed)?;
    if !learn_gate {
        return Ok(FusedModel {
            gate: uniform,
            items: base_items,
            editors: base_editors,
            gate_losses: Vec::new(),
        });
    }
    let nmor = NmorConfig {
        seed: seed::sub_seed(cfg.nmor.seed, name),
        ..cfg.nmor
    };
    let (gate, report) = train_nmor_masked(&reps.validation, &reps.seen, &base_editors, &reps.v, c, r, &nmor)?;
    log::info!("{name} gate losses {:?}", report.epoch_losses);
    let items = fused_matrix(&reps.v, c, r, &gate)?;
    let editors = fit_editors(&reps.train, &items, &cfg.editor_fit, fit_seed)?;
    Ok(FusedModel {
        gate,
        items,
        editors,
        gate_losses: report.epoch_losses,
    })
}

/// Builds the scoring bundle for a variant.
pub fn build_variant(reps: &Representations, variant: Variant, cfg: &ExperimentConfig) -> Result<ModelBundle> {
    let fused = match variant {
        Variant::Cf => {
            return Ok(ModelBundle {
                name: variant.name().into(),
                items: reps.v.clone(),
                editor_init: Some(reps.editors.clone()),
            })
        }
        Variant::Content => fit_fused(reps, &reps.c, &reps.zero_r(), cfg, true, variant.name())?,
        Variant::Full => fit_fused(reps, &reps.c, &reps.r, cfg, true, variant.name())?,
        Variant::Unweighted => fit_fused(reps, &reps.c, &reps.r, cfg, false, variant.name())?,
    };
    if variant != Variant::Unweighted {
        let means = mean_gate_weights(&fused.gate, &reps.v, &reps.c, &reps.r);
        log::info!("{} mean gate weights v/c/r {:.3}/{:.3}/{:.3}", variant.name(), means[0], means[1], means[2]);
    }
    Ok(ModelBundle {
        name: variant.name().into(),
        items: fused.items,
        editor_init: Some(fused.editors),
    })
}

/// Mean per-position weights over every item and position.
pub fn mean_gate_weights(gate: &GateParams, v: &EmbeddingMatrix, c: &EmbeddingMatrix, r: &EmbeddingMatrix) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for j in 0..v.rows() {
        for k in 0..v.dim() {
            let w = gate.position_weights(v.row(j)[k] as f64, c.row(j)[k] as f64, r.row(j)[k] as f64);
            for t in 0..3 {
                acc[t] += w[t];
            }
            n += 1;
        }
    }
    acc.map(|a| a / n.max(1) as f64)
}

pub fn run_variants(reps: &Representations, variants: &[Variant], cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    let data = reps.eval_data();
    variants
        .iter()
        .map(|&variant| {
            let bundle = build_variant(reps, variant, cfg)?;
            evaluate(&bundle, &data, &cfg.protocol, false)
        })
        .collect()
}

/// Generates a synthetic corpus and fits every representation on it.
pub fn synthetic_representations(synth: &SynthConfig, cfg: &ExperimentConfig) -> Result<Representations> {
    let corpus = generate(synth)?;
    let matrix = build_matrix(&corpus.events)?;
    let c = fit_content(&corpus.content, matrix.items(), &cfg.word_vectors)?;
    let r = fit_relations(&corpus.relations, matrix.items(), &cfg.transr)?;
    Representations::fit(&format!("synthetic-{}", synth.seed), &matrix, c, r, cfg)
}

/// Ablation on one synthetic corpus: one report per variant.
pub fn synthetic_ablation(synth: &SynthConfig, cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<MetricsReport>> {
    let reps = synthetic_representations(synth, cfg)?;
    run_variants(&reps, variants, cfg)
}

/// Representation width of the desk-scale studies.
pub const DESK_DIM: usize = 32;

/// Ablation of every variant on the default synthetic corpus for `seed`.
pub fn desk_ablation(seed: u64) -> Result<Vec<MetricsReport>> {
    let synth = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    synthetic_ablation(&synth, &ExperimentConfig::desk(DESK_DIM, seed), &Variant::ALL)
}

/// Slice budget of the desk sparsity study.
pub const DESK_SLICE_BUDGET: (usize, usize) = (800, 1200);

/// Full model on three slices of decreasing sparsity, placed at 90%, 50%
/// and 10% of the achievable range between the sparsest and the densest
/// slice. recall@10 is added to the protocol.
pub fn desk_sparsity_study(seed: u64) -> Result<Vec<SliceResult>> {
    let synth = SynthConfig {
        n_editors: 3000,
        n_items: 4000,
        min_items_per_editor: 4,
        max_items_per_editor: 60,
        seed,
        ..SynthConfig::default()
    };
    let matrix = build_matrix(&generate(&synth)?.events)?;
    let (lo, hi) = crate::eval::sparsity_range(&matrix, DESK_SLICE_BUDGET)?;
    let targets: Vec<f64> = [0.9, 0.5, 0.1].iter().map(|f| lo + f * (hi - lo)).collect();
    let mut cfg = ExperimentConfig::desk(DESK_DIM, seed);
    if !cfg.protocol.recall_k.contains(&10) {
        cfg.protocol.recall_k.insert(0, 10);
    }
    synthetic_sparsity_study(&synth, &cfg, &targets, DESK_SLICE_BUDGET, Variant::Full)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub target: f64,
    pub achieved: f64,
    pub report: MetricsReport,
}

/// Cuts slices of `budget` size at each target sparsity out of a synthetic
/// corpus and evaluates `variant` on each. Content and relational vectors
/// are fitted once on the whole corpus.
pub fn synthetic_sparsity_study(
    synth: &SynthConfig,
    cfg: &ExperimentConfig,
    targets: &[f64],
    budget: (usize, usize),
    variant: Variant,
) -> Result<Vec<SliceResult>> {
    let corpus = generate(synth)?;
    let matrix = build_matrix(&corpus.events)?;
    let c = fit_content(&corpus.content, matrix.items(), &cfg.word_vectors)?;
    let r = fit_relations(&corpus.relations, matrix.items(), &cfg.transr)?;
    let slices = sparsity_slices(&matrix, targets, budget)?;
    slices
        .into_iter()
        .map(|slice| {
            let ids = slice.matrix.items().to_vec();
            let (cs, _) = c.align_to(&ids);
            let (rs, _) = r.align_to(&ids);
            let name = format!("synthetic-{}-slice-{:.4}", synth.seed, slice.achieved);
            let reps = Representations::fit(&name, &slice.matrix, cs, rs, cfg)?;
            let report = run_variants(&reps, &[variant], cfg)?.remove(0);
            Ok(SliceResult {
                target: slice.target,
                achieved: slice.achieved,
                report,
            })
        })
        .collect()
}
