//! Run configuration read from a TOML file.
//!
//! Component blocks inherit the top-level `dim` when they omit it and may
//! not carry their own `seed`: every component seed is derived from the
//! global seed and the component name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ProtocolConfig;
use crate::experiment::{EditorFitConfig, ExperimentConfig};
use crate::graph::TransRConfig;
use crate::ingest::{FilterMode, SplitSpec};
use crate::mf::{BprConfig, EalsConfig};
use crate::nmor::NmorConfig;
use crate::seed::sub_seed;
use crate::text::WordVectorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub edits: PathBuf,
    pub items: PathBuf,
    pub relations: PathBuf,
    /// Optional `item_id,token,pos` table enabling the part-of-speech filter.
    #[serde(default)]
    pub pos_tags: Option<PathBuf>,
    /// Optional externally computed content embeddings used instead of
    /// word vectors.
    #[serde(default)]
    pub content_embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub max_edits_per_hour: f64,
    pub min_items_per_editor: usize,
    pub min_editors_per_item: usize,
    pub filter_mode: FilterMode,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            max_edits_per_hour: 120.0,
            min_items_per_editor: 200,
            min_editors_per_item: 5,
            filter_mode: FilterMode::FixedPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub paths: InputPaths,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub bpr: BprConfig,
    #[serde(default)]
    pub gmf: BprConfig,
    #[serde(default)]
    pub eals: EalsConfig,
    #[serde(default)]
    pub word_vectors: WordVectorConfig,
    #[serde(default)]
    pub transr: TransRConfig,
    #[serde(default)]
    pub nmor: NmorConfig,
    #[serde(default)]
    pub editor_fit: EditorFitConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
}

fn default_dim() -> usize {
    1024
}

fn default_dataset() -> String {
    "corpus".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

const DIM_BLOCKS: [&str; 5] = ["bpr", "gmf", "eals", "word_vectors", "transr"];
const SEEDED_BLOCKS: [&str; 8] = ["split", "bpr", "gmf", "eals", "word_vectors", "transr", "nmor", "protocol"];

impl RunConfig {
    /// Parses TOML text. Relative input paths stay relative; callers
    /// resolve them (see [`RunConfig::load`]).
    pub fn parse(text: &str) -> Result<Self> {
        let mut value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let dim = match value.get("dim") {
            Some(v) => v.as_integer().filter(|&d| d > 0).ok_or_else(|| Error::Config("dim must be a positive integer".into()))?,
            None => default_dim() as i64,
        };
        for name in SEEDED_BLOCKS {
            if let Some(block) = value.get(name).and_then(|b| b.as_table()) {
                if block.contains_key("seed") {
                    return Err(Error::Config(format!(
                        "[{name}] may not set seed; component seeds derive from the global seed"
                    )));
                }
            }
        }
        for name in DIM_BLOCKS {
            let block = value
                .entry(name)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let table = block
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{name} must be a table")))?;
            table.entry("dim").or_insert(toml::Value::Integer(dim));
        }
        let mut cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.apply_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative input paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.edits, &mut cfg.paths.items, &mut cfg.paths.relations] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [&mut cfg.paths.pos_tags, &mut cfg.paths.content_embeddings].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Sets the global seed and re-derives every component seed.
    pub fn apply_seed(&mut self, global: u64) {
        self.seed = global;
        self.split.seed = sub_seed(global, "split");
        self.bpr.seed = sub_seed(global, "bpr");
        self.gmf.seed = sub_seed(global, "gmf");
        self.eals.seed = sub_seed(global, "eals");
        self.word_vectors.seed = sub_seed(global, "word_vectors");
        self.transr.seed = sub_seed(global, "transr");
        self.nmor.seed = sub_seed(global, "nmor");
        self.protocol.seed = sub_seed(global, "protocol");
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("bpr", self.bpr.dim),
            ("gmf", self.gmf.dim),
            ("eals", self.eals.dim),
            ("word_vectors", self.word_vectors.dim),
            ("transr", self.transr.dim),
        ];
        if let Some((name, d)) = dims.iter().find(|(_, d)| *d != self.dim) {
            return Err(Error::Config(format!("[{name}] dim = {d} differs from dim = {}", self.dim)));
        }
        if !(self.ingest.max_edits_per_hour > 0.0) {
            return Err(Error::Config("ingest.max_edits_per_hour must be positive".into()));
        }
        if self.ingest.min_items_per_editor == 0 || self.ingest.min_editors_per_item == 0 {
            return Err(Error::Config("ingest thresholds must be at least 1".into()));
        }
        self.split.validate()?;
        self.bpr.validate()?;
        self.gmf.validate()?;
        self.protocol.validate()
    }

    /// The subset used by the experiment pipeline.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            dim: self.dim,
            split: self.split,
            bpr: self.bpr,
            word_vectors: self.word_vectors,
            transr: self.transr,
            nmor: self.nmor,
            editor_fit: self.editor_fit,
            protocol: self.protocol.clone(),
        }
    }
}
