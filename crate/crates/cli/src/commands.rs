use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::Serialize;
use wdrec_core::config::RunConfig;
use wdrec_core::eval::{evaluate, fold_in_editor, sparsity_slices, FoldInConfig, MetricsReport, ModelBundle};
use wdrec_core::experiment::{fit_fused, Representations, Variant};
use wdrec_core::graph::{relational_matrix, save_transr, train_transr};
use wdrec_core::ingest::{
    build_matrix, filter_active, parse_content, parse_edits, parse_relations, remove_outliers, split_holdout, stats,
    DatasetStats, InteractionMatrix,
};
use wdrec_core::mf::{train_bpr, train_eals, train_gmf, EmbeddingMatrix, Factors};
use wdrec_core::nmor::GateParams;
use wdrec_core::seed::sub_seed;
use wdrec_core::store::{self, read_gate, write_gate};
use wdrec_core::synth::{generate, SynthConfig};
use wdrec_core::text::{
    apply_pos_filter, content_matrix, import_external, parse_tagged_tokens, preprocess, train_word_vectors,
    DEFAULT_STOPWORDS,
};
use wdrec_core::{Error, Result};

use crate::layout::{
    read_embeddings, read_matrix, read_matrix_like, require, write_json, write_loss_log, write_matrix, write_text, Layout,
};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

struct Corpus {
    events_kept: Vec<wdrec_core::ingest::EditEvent>,
    raw: InteractionMatrix,
    filtered: InteractionMatrix,
    outliers: wdrec_core::ingest::OutlierReport,
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let events = parse_edits(open(&cfg.paths.edits)?)?;
    let (kept, outliers) = remove_outliers(&events, cfg.ingest.max_edits_per_hour)?;
    if !outliers.removed_editors.is_empty() {
        log::info!("removed {} high-rate editors", outliers.removed_editors.len());
    }
    let raw = build_matrix(&kept)?;
    let filtered = filter_active(
        &raw,
        cfg.ingest.min_items_per_editor,
        cfg.ingest.min_editors_per_item,
        cfg.ingest.filter_mode,
    )?;
    // Round-trip through the pair format so every later command sees the
    // same catalog order.
    let mut buf = Vec::new();
    filtered.write_pairs(&mut buf)?;
    let filtered = InteractionMatrix::read_pairs(buf.as_slice())?;
    Ok(Corpus {
        events_kept: kept,
        raw,
        filtered,
        outliers,
    })
}

#[derive(Serialize)]
struct OutlierJson<'a> {
    threshold: f64,
    removed_editors: &'a [String],
}

fn write_split(layout: &Layout, cfg: &RunConfig, filtered: &InteractionMatrix) -> Result<()> {
    let split = split_holdout(filtered, &cfg.split)?;
    write_matrix(&layout.corpus("train.csv"), &split.train)?;
    write_matrix(&layout.corpus("validation.csv"), &split.validation)?;
    write_matrix(&layout.corpus("test.csv"), &split.test)?;
    let mut cold = split.cold_start.join("\n");
    if !cold.is_empty() {
        cold.push('\n');
    }
    write_text(&layout.corpus("cold_start.txt"), &cold)?;
    log::info!(
        "split: {} train, {} validation, {} test pairs; {} cold-start editors",
        split.train.n_interactions(),
        split.validation.n_interactions(),
        split.test.n_interactions(),
        split.cold_start.len()
    );
    Ok(())
}

pub fn ingest(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    layout.corpus_dir()?;
    write_matrix(&layout.corpus("interactions.csv"), &corpus.raw)?;
    write_matrix(&layout.corpus("filtered.csv"), &corpus.filtered)?;
    write_json(&layout.corpus("raw_stats.json"), &stats(&corpus.raw, &corpus.events_kept))?;
    write_json(&layout.corpus("stats.json"), &stats(&corpus.filtered, &corpus.events_kept))?;
    write_json(
        &layout.corpus("outliers.json"),
        &OutlierJson {
            threshold: cfg.ingest.max_edits_per_hour,
            removed_editors: &corpus.outliers.removed_editors,
        },
    )?;
    write_split(layout, cfg, &corpus.filtered)?;
    println!(
        "ingested {} editors x {} items ({} pairs) into {}",
        corpus.filtered.n_editors(),
        corpus.filtered.n_items(),
        corpus.filtered.n_interactions(),
        layout.root.join("corpus").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct StatsPair {
    raw: DatasetStats,
    filtered: DatasetStats,
}

pub fn print_stats(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let out = StatsPair {
        raw: stats(&corpus.raw, &corpus.events_kept),
        filtered: stats(&corpus.filtered, &corpus.events_kept),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

pub fn split(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let path = layout.corpus("filtered.csv");
    require(&path, "filtered interaction matrix", "ingest")?;
    write_split(layout, cfg, &read_matrix(&path)?)
}

/// Filtered matrix plus the three splits in its index space.
struct Splits {
    catalog: InteractionMatrix,
    train: InteractionMatrix,
    validation: InteractionMatrix,
    test: InteractionMatrix,
}

fn load_splits(layout: &Layout) -> Result<Splits> {
    let path = layout.corpus("filtered.csv");
    require(&path, "filtered interaction matrix", "ingest")?;
    let catalog = read_matrix(&path)?;
    let mut parts = Vec::new();
    for name in ["train.csv", "validation.csv", "test.csv"] {
        let p = layout.corpus(name);
        require(&p, "split", "split")?;
        parts.push(read_matrix_like(&catalog, &p)?);
    }
    let test = parts.pop().expect("three parts");
    let validation = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok(Splits {
        catalog,
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Component {
    Bpr,
    Gmf,
    Eals,
    Content,
    Transr,
    Nmor,
}

fn save_factors(layout: &Layout, name: &str, f: &Factors) -> Result<()> {
    layout.models_dir()?;
    store::write_embeddings(&f.editors, layout.model(&format!("{name}.editors.bin")))?;
    store::write_embeddings(&f.items, layout.model(&format!("{name}.items.bin")))?;
    write_loss_log(&layout.logs_dir()?.join(format!("{name}.csv")), &f.loss_log, 0)
}

pub fn train(component: Component, cfg: &RunConfig, layout: &Layout) -> Result<()> {
    match component {
        Component::Bpr => save_factors(layout, "bpr", &train_bpr(&load_splits(layout)?.train, &cfg.bpr)?),
        Component::Gmf => save_factors(layout, "gmf", &train_gmf(&load_splits(layout)?.train, &cfg.gmf)?),
        Component::Eals => save_factors(layout, "eals", &train_eals(&load_splits(layout)?.train, &cfg.eals)?),
        Component::Content => train_content(cfg, layout),
        Component::Transr => train_relations(cfg, layout),
        Component::Nmor => train_gates(cfg, layout),
    }?;
    let name = clap::ValueEnum::to_possible_value(&component).expect("no skipped variants");
    println!("trained {} into {}", name.get_name(), layout.root.join("models").display());
    Ok(())
}

fn train_content(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let catalog = load_splits(layout)?.catalog;
    let (c, losses) = match &cfg.paths.content_embeddings {
        Some(path) => {
            let (c, missing) = import_external(path, cfg.dim, Some(catalog.items()))?;
            log::info!("imported content embeddings; {missing} catalog items missing");
            (c, Vec::new())
        }
        None => {
            let records = parse_content(open(&cfg.paths.items)?)?;
            let stop: HashSet<String> = DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect();
            let mut docs: Vec<_> = records
                .iter()
                .map(|r| preprocess(&r.item_id, &r.label, &r.description, &stop))
                .collect();
            if let Some(tags) = &cfg.paths.pos_tags {
                apply_pos_filter(&mut docs, &parse_tagged_tokens(open(tags)?)?);
            }
            let wv = train_word_vectors(&docs, &cfg.word_vectors)?;
            let (c, fallbacks) = content_matrix(&docs, &wv)?;
            log::info!("content vectors for {} items, {fallbacks} zero fallbacks", c.rows());
            let (c, missing) = c.align_to(catalog.items());
            if missing > 0 {
                log::warn!("{missing} catalog items have no content record; zero vectors used");
            }
            (c, wv.epoch_losses)
        }
    };
    layout.models_dir()?;
    store::write_embeddings(&c, layout.model("content.bin"))?;
    write_loss_log(&layout.logs_dir()?.join("content.csv"), &losses, 1)
}

fn train_relations(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let catalog = load_splits(layout)?.catalog;
    let triples = parse_relations(open(&cfg.paths.relations)?)?;
    let (model, report) = train_transr(&triples, &cfg.transr)?;
    let dir = layout.models_dir()?;
    save_transr(&model, &dir, "transr")?;
    let (r, missing) = relational_matrix(&model, catalog.items())?;
    log::info!("{missing} catalog items outside the relation graph");
    store::write_embeddings(&r, layout.model("relational.bin"))?;
    write_loss_log(&layout.logs_dir()?.join("transr.csv"), &report.epoch_losses, 1)
}

fn load_representations(cfg: &RunConfig, layout: &Layout) -> Result<Representations> {
    let s = load_splits(layout)?;
    let e = read_embeddings(&layout.model("bpr.editors.bin"), "editor vectors E", "train bpr")?;
    let v = read_embeddings(&layout.model("bpr.items.bin"), "item-centric vectors V", "train bpr")?;
    let c = read_embeddings(&layout.model("content.bin"), "content vectors C", "train content")?;
    let r = read_embeddings(&layout.model("relational.bin"), "relational vectors R", "train transr")?;
    for (name, m) in [("E", &e), ("V", &v), ("C", &c), ("R", &r)] {
        if m.dim() != cfg.dim {
            return Err(Error::Config(format!("{name} has dim {} but the config says {}", m.dim(), cfg.dim)));
        }
    }
    let (c, _) = c.align_to(s.catalog.items());
    let (r, _) = r.align_to(s.catalog.items());
    Representations::from_parts(&cfg.dataset, s.train, s.validation, s.test, &e, &v, c, r)
}

const FUSED: [Variant; 3] = [Variant::Content, Variant::Full, Variant::Unweighted];

fn train_gates(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let reps = load_representations(cfg, layout)?;
    let exp = cfg.experiment();
    let zero_r = EmbeddingMatrix::zeros(reps.r.ids().to_vec(), reps.r.dim());
    layout.models_dir()?;
    for variant in FUSED {
        let name = variant.name();
        let r = if variant == Variant::Content { &zero_r } else { &reps.r };
        let fused = fit_fused(&reps, &reps.c, r, &exp, variant != Variant::Unweighted, name)?;
        write_gate(&fused.gate.to_checkpoint(cfg.dim), layout.model(&format!("{name}.gate.bin")))?;
        store::write_embeddings(&fused.items, layout.model(&format!("{name}.items.bin")))?;
        store::write_embeddings(&fused.editors, layout.model(&format!("{name}.editors.bin")))?;
        if variant != Variant::Unweighted {
            let log_name = if variant == Variant::Full { "nmor.csv".to_string() } else { format!("nmor_{name}.csv") };
            write_loss_log(&layout.logs_dir()?.join(log_name), &fused.gate_losses, 1)?;
        }
    }
    Ok(())
}

fn bundle(layout: &Layout, variant: Variant) -> Result<ModelBundle> {
    let (items, editors) = match variant {
        Variant::Cf => (
            read_embeddings(&layout.model("bpr.items.bin"), "item-centric vectors V", "train bpr")?,
            read_embeddings(&layout.model("bpr.editors.bin"), "editor vectors E", "train bpr")?,
        ),
        v => (
            read_embeddings(&layout.model(&format!("{}.items.bin", v.name())), "fused item vectors", "train nmor")?,
            read_embeddings(&layout.model(&format!("{}.editors.bin", v.name())), "fused editor vectors", "train nmor")?,
        ),
    };
    Ok(ModelBundle {
        name: variant.name().into(),
        items,
        editor_init: Some(editors),
    })
}

pub fn eval(cfg: &RunConfig, layout: &Layout, variants: &[Variant], per_editor: bool) -> Result<Vec<MetricsReport>> {
    let s = load_splits(layout)?;
    let seen = s.train.union(&s.validation)?;
    let content = read_embeddings(&layout.model("content.bin"), "content vectors C", "train content")?;
    let (content, _) = content.align_to(s.catalog.items());
    let data = wdrec_core::eval::EvalData {
        seen: &seen,
        test: &s.test,
        content: &content,
        dataset: cfg.dataset.clone(),
    };
    let dir = layout.eval_dir()?;
    let mut reports = Vec::new();
    for &variant in variants {
        let mut model = bundle(layout, variant)?;
        let (items, _) = model.items.align_to(s.catalog.items());
        model.items = items;
        let report = evaluate(&model, &data, &cfg.protocol, per_editor)?;
        write_json(&dir.join(format!("{}.json", variant.name())), &report)?;
        reports.push(report);
    }
    let table = metrics_table(&reports, &cfg.protocol.metric_names())?;
    write_text(&dir.join("table.csv"), &table)?;
    print!("{table}");
    Ok(reports)
}

/// One row per report with the metric columns in protocol order.
pub fn metrics_table(reports: &[MetricsReport], names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.meta.model.clone()];
        row.extend(names.iter().map(|n| r.get(n).map(|v| format!("{v:.6}")).unwrap_or_default()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<table>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub struct Recommendation {
    pub items: Vec<(String, f64)>,
    pub mean_weights: [f64; 3],
}

pub fn recommend(cfg: &RunConfig, layout: &Layout, editor: &str, k: usize, fold_items: &[String]) -> Result<Recommendation> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let s = load_splits(layout)?;
    let model = bundle(layout, Variant::Full)?;
    let gate_path = layout.model("full.gate.bin");
    require(&gate_path, "NMoR gate", "train nmor")?;
    let gate = GateParams::from_checkpoint(&read_gate(&gate_path)?)?;
    let v = read_embeddings(&layout.model("bpr.items.bin"), "item-centric vectors V", "train bpr")?;
    let c = read_embeddings(&layout.model("content.bin"), "content vectors C", "train content")?;
    let r = read_embeddings(&layout.model("relational.bin"), "relational vectors R", "train transr")?;
    let (items, _) = model.items.align_to(s.catalog.items());

    let mut touched: HashSet<u32> = HashSet::new();
    let e: Vec<f64> = match s.catalog.editor_index(editor) {
        Some(i) if fold_items.is_empty() => {
            for m in [&s.train, &s.validation, &s.test] {
                touched.extend(m.row(i));
            }
            let editors = model.editor_init.as_ref().expect("bundle has editors");
            editors
                .get(editor)
                .map(|row| row.iter().map(|&x| x as f64).collect())
                .ok_or_else(|| Error::UnknownId {
                    kind: "editor",
                    id: editor.to_string(),
                })?
        }
        _ if !fold_items.is_empty() => {
            let mut positives = Vec::new();
            for id in fold_items {
                let j = s.catalog.item_index(id).ok_or_else(|| Error::UnknownId {
                    kind: "item",
                    id: id.clone(),
                })?;
                positives.push(j);
                touched.insert(j as u32);
            }
            positives.sort_unstable();
            positives.dedup();
            let mut excluded: Vec<u32> = touched.iter().copied().collect();
            excluded.sort_unstable();
            let fold = FoldInConfig {
                steps: cfg.editor_fit.steps,
                learning_rate: cfg.editor_fit.learning_rate,
                l2: cfg.editor_fit.l2,
                seed: sub_seed(cfg.seed, &format!("recommend/{editor}")),
            };
            fold_in_editor(&positives, &items, &excluded, &vec![0.0; cfg.dim], &fold)?
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown editor {editor}; pass --items <Q1,Q2,...> to fold in from an item list"
            )))
        }
    };

    let zero = vec![0.0; cfg.dim];
    let row = |m: &EmbeddingMatrix, id: &str| m.get(id).map(|r| r.iter().map(|&x| x as f64).collect()).unwrap_or_else(|| zero.clone());
    let mut scored = Vec::new();
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for (j, id) in s.catalog.items().iter().enumerate() {
        if touched.contains(&(j as u32)) {
            continue;
        }
        let (vv, cc, rr) = (row(&v, id), row(&c, id), row(&r, id));
        let w = wdrec_core::nmor::gate_forward(&vv, &cc, &rr, &gate)?;
        let m = w.means();
        for t in 0..3 {
            acc[t] += m[t];
        }
        n += 1;
        let score = items.row(j).iter().zip(&e).map(|(&x, y)| x as f64 * y).sum::<f64>();
        scored.push((id.clone(), score));
    }
    if scored.is_empty() {
        return Err(Error::EmptyInput("no candidate items left for this editor"));
    }
    let mut ranked = wdrec_core::nmor::rank_scores(scored);
    ranked.truncate(k);
    Ok(Recommendation {
        items: ranked,
        mean_weights: acc.map(|a| a / n as f64),
    })
}

#[derive(Serialize)]
struct SliceJson {
    target: f64,
    achieved: f64,
    file: String,
    n_editors: usize,
    n_items: usize,
    n_interactions: usize,
}

pub fn slice(layout: &Layout, targets: &[f64], budget: (usize, usize)) -> Result<()> {
    let path = layout.corpus("filtered.csv");
    require(&path, "filtered interaction matrix", "ingest")?;
    let m = read_matrix(&path)?;
    let slices = sparsity_slices(&m, targets, budget)?;
    let dir = layout.slices_dir()?;
    let mut summary = Vec::new();
    for (k, s) in slices.iter().enumerate() {
        let file = format!("slice_{k}.csv");
        write_matrix(&dir.join(&file), &s.matrix)?;
        println!("{file}: target {:.6} achieved {:.6}", s.target, s.matrix.sparsity());
        summary.push(SliceJson {
            target: s.target,
            achieved: s.achieved,
            file,
            n_editors: s.matrix.n_editors(),
            n_items: s.matrix.n_items(),
            n_interactions: s.matrix.n_interactions(),
        });
    }
    write_json(&dir.join("slices.json"), &summary)
}

/// Writes a synthetic corpus and a config that runs the whole pipeline on it.
pub fn synth(dir: &Path, synth: &SynthConfig, dim: usize) -> Result<()> {
    let corpus = generate(synth)?;
    corpus.write_csvs(dir)?;
    let config = format!(
        r#"seed = {seed}
dim = {dim}
dataset = "synthetic-{seed}"
out = "run"

[paths]
edits = "edits.csv"
items = "items.csv"
relations = "relations.csv"

[ingest]
min_items_per_editor = 2
min_editors_per_item = 1

[bpr]
epochs = 30

[gmf]
epochs = 30

[eals]
epochs = 10

[nmor]
hidden = 8
batch_size = 64
learning_rate = 0.01
epochs = 10
"#,
        seed = synth.seed
    );
    write_text(&dir.join("config.toml"), &config)?;
    let mut counts = BTreeMap::new();
    counts.insert("edits", corpus.events.len());
    counts.insert("items", corpus.content.len());
    counts.insert("triples", corpus.relations.len());
    println!("wrote synthetic corpus to {}: {counts:?}", dir.display());
    Ok(())
}
