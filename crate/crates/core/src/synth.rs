//! Seeded synthetic corpora whose edits mix a latent, a topical (visible in
//! item text) and a sub-topical (visible only in the relation graph) signal.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EditEvent, ItemContentRecord, Triple, TripleStore};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_editors: usize,
    pub n_items: usize,
    pub n_topics: usize,
    pub subtopics_per_topic: usize,
    pub latent_dim: usize,
    pub min_items_per_editor: usize,
    pub max_items_per_editor: usize,
    /// Affinity bonus for items in one of the editor's topics.
    pub topic_weight: f64,
    /// Extra bonus for the editor's preferred sub-topic of that topic.
    pub subtopic_weight: f64,
    pub latent_weight: f64,
    pub popularity_weight: f64,
    /// Gumbel noise scale on affinities; higher means noisier choices.
    pub temperature: f64,
    pub topic_vocabulary: usize,
    pub generic_vocabulary: usize,
    pub topic_words_per_doc: usize,
    pub generic_words_per_doc: usize,
    /// Probability that an item appears in the relation graph.
    pub graph_coverage: f64,
    pub links_per_item: usize,
    /// Probability that a link points outside the item's sub-topic.
    pub link_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_editors: 2000,
            n_items: 5000,
            n_topics: 20,
            subtopics_per_topic: 5,
            latent_dim: 8,
            min_items_per_editor: 8,
            max_items_per_editor: 30,
            topic_weight: 3.0,
            subtopic_weight: 2.0,
            latent_weight: 1.5,
            popularity_weight: 0.5,
            temperature: 1.0,
            topic_vocabulary: 25,
            generic_vocabulary: 300,
            topic_words_per_doc: 4,
            generic_words_per_doc: 4,
            graph_coverage: 0.8,
            links_per_item: 3,
            link_noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_editors == 0 || self.n_items == 0 || self.n_topics == 0 || self.subtopics_per_topic == 0 {
            return Err(Error::InvalidArgument("synthetic sizes must be positive".into()));
        }
        if self.min_items_per_editor == 0 || self.min_items_per_editor > self.max_items_per_editor {
            return Err(Error::InvalidArgument("need 1 <= min_items_per_editor <= max_items_per_editor".into()));
        }
        if self.max_items_per_editor > self.n_items {
            return Err(Error::InvalidArgument("max_items_per_editor exceeds n_items".into()));
        }
        if !(0.0..=1.0).contains(&self.graph_coverage) || !(0.0..=1.0).contains(&self.link_noise) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        if !(self.temperature > 0.0) || self.topic_vocabulary == 0 {
            return Err(Error::InvalidArgument("temperature and topic_vocabulary must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub events: Vec<EditEvent>,
    pub content: Vec<ItemContentRecord>,
    pub relations: TripleStore,
    /// (topic, sub-topic) per item, in catalog order.
    pub item_groups: Vec<(usize, usize)>,
}

pub fn item_id(j: usize) -> String {
    format!("Q{}", j + 1)
}

pub fn editor_id(i: usize) -> String {
    format!("U{}", i + 1)
}

fn normal_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = seed::component_rng(cfg.seed, "synth");
    let n_groups = cfg.n_topics * cfg.subtopics_per_topic;
    let item_groups: Vec<(usize, usize)> = (0..cfg.n_items)
        .map(|_| {
            (
                rng.random_range(0..cfg.n_topics),
                rng.random_range(0..cfg.subtopics_per_topic),
            )
        })
        .collect();
    let latent_scale = 1.0 / (cfg.latent_dim.max(1) as f64).sqrt();
    let item_latent: Vec<Vec<f64>> = (0..cfg.n_items)
        .map(|_| normal_vec(&mut rng, cfg.latent_dim, latent_scale))
        .collect();
    let popularity: Vec<f64> = normal_vec(&mut rng, cfg.n_items, 1.0);

    let gumbel = Gumbel::new(0.0, cfg.temperature).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let start: DateTime<Utc> = DateTime::from_timestamp(1_577_836_800, 0).expect("valid epoch");
    let mut events = Vec::new();
    for i in 0..cfg.n_editors {
        let editor = editor_id(i);
        let n_pref = if rng.random_bool(0.5) { 1 } else { 2 };
        let prefs: Vec<(usize, usize)> = (0..n_pref)
            .map(|_| {
                (
                    rng.random_range(0..cfg.n_topics),
                    rng.random_range(0..cfg.subtopics_per_topic),
                )
            })
            .collect();
        let u = normal_vec(&mut rng, cfg.latent_dim, latent_scale);
        let n = rng.random_range(cfg.min_items_per_editor..=cfg.max_items_per_editor);
        let mut scored: Vec<(f64, usize)> = (0..cfg.n_items)
            .map(|j| {
                let (t, s) = item_groups[j];
                let mut a = cfg.latent_weight * crate::math::dot(&u, &item_latent[j])
                    + cfg.popularity_weight * popularity[j];
                if prefs.iter().any(|&(pt, _)| pt == t) {
                    a += cfg.topic_weight;
                }
                if prefs.contains(&(t, s)) {
                    a += cfg.subtopic_weight;
                }
                let g: f64 = gumbel.sample(&mut rng);
                (a + g, j)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (k, &(_, j)) in scored.iter().take(n).enumerate() {
            let ts = start + Duration::hours((i * cfg.max_items_per_editor + k) as i64);
            events.push(EditEvent::new(&editor, &item_id(j), ts, "wbeditentity-update"));
        }
    }
    events.sort_by_key(|e| e.timestamp);

    let content = (0..cfg.n_items)
        .map(|j| {
            let (t, _) = item_groups[j];
            let mut words: Vec<String> = (0..cfg.topic_words_per_doc)
                .map(|_| format!("t{t}w{}", rng.random_range(0..cfg.topic_vocabulary)))
                .collect();
            if cfg.generic_vocabulary > 0 {
                words.extend(
                    (0..cfg.generic_words_per_doc).map(|_| format!("g{}", rng.random_range(0..cfg.generic_vocabulary))),
                );
            }
            words.shuffle(&mut rng);
            ItemContentRecord {
                item_id: item_id(j),
                label: format!("item {}", words[0]),
                description: words[1..].join(" "),
            }
        })
        .collect();

    let in_graph: Vec<bool> = (0..cfg.n_items).map(|_| rng.random_bool(cfg.graph_coverage)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for j in (0..cfg.n_items).filter(|&j| in_graph[j]) {
        let (t, s) = item_groups[j];
        members[t * cfg.subtopics_per_topic + s].push(j);
    }
    let graph_items: Vec<usize> = (0..cfg.n_items).filter(|&j| in_graph[j]).collect();
    let mut triples = Vec::new();
    for &j in &graph_items {
        let (t, s) = item_groups[j];
        triples.push(Triple::new(item_id(j), "instance_of", format!("class_{t}_{s}")));
        let group = &members[t * cfg.subtopics_per_topic + s];
        for _ in 0..cfg.links_per_item {
            let k = if rng.random_bool(cfg.link_noise) || group.len() < 2 {
                graph_items[rng.random_range(0..graph_items.len())]
            } else {
                group[rng.random_range(0..group.len())]
            };
            if k != j {
                triples.push(Triple::new(item_id(j), "related_to", item_id(k)));
            }
        }
    }
    let relations = TripleStore::from_triples(triples);
    log::info!(
        "synthetic corpus: {} edits, {} items, {} triples",
        events.len(),
        cfg.n_items,
        relations.len()
    );
    Ok(SynthCorpus {
        events,
        content,
        relations,
        item_groups,
    })
}

impl SynthCorpus {
    /// Writes `edits.csv`, `items.csv` and `relations.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(&p, e))
        };
        let mut w = csv::Writer::from_writer(open("edits.csv")?);
        w.write_record(["editor_id", "item_id", "timestamp", "comment"])?;
        for e in &self.events {
            w.write_record([
                e.editor_id.as_str(),
                &e.item_id,
                &e.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                &e.comment,
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_writer(open("items.csv")?);
        w.write_record(["item_id", "label", "description"])?;
        for c in &self.content {
            w.write_record([&c.item_id, &c.label, &c.description])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        let mut out = open("relations.csv")?;
        self.relations.write_csv(&mut out)?;
        out.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }
}
