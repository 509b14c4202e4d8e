use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EditEvent, InteractionMatrix};
use crate::math::summary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let (median, mean, std) = summary(values);
        Summary { median, mean, std }
    }
}

/// `n_interactions` counts distinct (editor, item) pairs; `n_edits` counts
/// raw edit events, so both readings of "interactions" are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_editors: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub sparsity: f64,
    pub items_per_editor: Summary,
    pub edits_per_editor: Summary,
    pub editors_per_item: Summary,
    pub n_edits: usize,
}

/// `1 - interactions / (editors * items)`; an empty matrix is fully sparse.
pub fn sparsity(n_editors: usize, n_items: usize, n_interactions: usize) -> f64 {
    let cells = n_editors as f64 * n_items as f64;
    if cells == 0.0 {
        return 1.0;
    }
    1.0 - n_interactions as f64 / cells
}

/// Events whose editor is not in `m` are ignored.
pub fn stats(m: &InteractionMatrix, events: &[EditEvent]) -> DatasetStats {
    let items_per_editor: Vec<f64> = m.rows().iter().map(|r| r.len() as f64).collect();
    let editors_per_item: Vec<f64> = m.item_degrees().into_iter().map(|d| d as f64).collect();
    let mut edits: HashMap<&str, usize> = HashMap::new();
    for e in events {
        if m.editor_index(&e.editor_id).is_some() {
            *edits.entry(e.editor_id.as_str()).or_default() += 1;
        }
    }
    let edits_per_editor: Vec<f64> = m
        .editors()
        .iter()
        .map(|id| edits.get(id.as_str()).copied().unwrap_or(0) as f64)
        .collect();
    DatasetStats {
        n_editors: m.n_editors(),
        n_items: m.n_items(),
        n_interactions: m.n_interactions(),
        sparsity: m.sparsity(),
        items_per_editor: Summary::of(&items_per_editor),
        edits_per_editor: Summary::of(&edits_per_editor),
        editors_per_item: Summary::of(&editors_per_item),
        n_edits: edits.values().sum(),
    }
}
