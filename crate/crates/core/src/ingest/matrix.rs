use std::collections::HashMap;
use std::io::{Read, Write};

use super::{check_header, csv_reader, row_error, EditEvent};
use crate::error::{Error, Result};

/// Binary editor × item matrix stored row-wise; each row is a sorted list
/// of item indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    editors: Vec<String>,
    items: Vec<String>,
    rows: Vec<Vec<u32>>,
    editor_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl InteractionMatrix {
    /// Builds a matrix from index pairs. Pairs may repeat; out-of-range
    /// indices are rejected.
    pub fn from_pairs(
        editors: Vec<String>,
        items: Vec<String>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); editors.len()];
        for (i, j) in pairs {
            if i >= editors.len() || j >= items.len() {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i},{j}) outside {}x{}",
                    editors.len(),
                    items.len()
                )));
            }
            rows[i].push(j as u32);
        }
        Self::from_rows(editors, items, rows)
    }

    pub fn from_rows(editors: Vec<String>, items: Vec<String>, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        if rows.len() != editors.len() {
            return Err(Error::InvalidArgument("row count differs from editor count".into()));
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if row.last().is_some_and(|&j| j as usize >= items.len()) {
                return Err(Error::InvalidArgument("item index out of range".into()));
            }
        }
        let editor_index = index_of(&editors)?;
        let item_index = index_of(&items)?;
        Ok(InteractionMatrix {
            editors,
            items,
            rows,
            editor_index,
            item_index,
        })
    }

    /// Same editor and item orderings, no entries.
    pub fn empty_like(&self) -> Self {
        InteractionMatrix {
            rows: vec![Vec::new(); self.editors.len()],
            ..self.clone()
        }
    }

    pub fn n_editors(&self) -> usize {
        self.editors.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn editors(&self) -> &[String] {
        &self.editors
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn row(&self, editor: usize) -> &[u32] {
        &self.rows[editor]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn contains(&self, editor: usize, item: usize) -> bool {
        self.rows[editor].binary_search(&(item as u32)).is_ok()
    }

    pub fn editor_index(&self, id: &str) -> Option<usize> {
        self.editor_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j as usize)))
    }

    /// Number of editors per item.
    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.items.len()];
        for row in &self.rows {
            for &j in row {
                deg[j as usize] += 1;
            }
        }
        deg
    }

    /// Editors that touched each item, ascending.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.items.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                cols[j as usize].push(i as u32);
            }
        }
        cols
    }

    pub fn sparsity(&self) -> f64 {
        super::sparsity(self.n_editors(), self.n_items(), self.n_interactions())
    }

    /// Keeps the listed editors and items (in the given order) and every
    /// entry between them.
    /// Cell-wise union with a matrix over the same editor and item index space.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.editors != other.editors || self.items != other.items {
            return Err(Error::InvalidArgument("union needs matrices over the same index space".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut r: Vec<u32> = a.iter().chain(b).copied().collect();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        Self::from_rows(self.editors.clone(), self.items.clone(), rows)
    }

    pub fn submatrix(&self, editors: &[usize], items: &[usize]) -> Self {
        let mut remap = vec![u32::MAX; self.items.len()];
        for (new, &old) in items.iter().enumerate() {
            remap[old] = new as u32;
        }
        let rows = editors
            .iter()
            .map(|&i| {
                let mut r: Vec<u32> = self.rows[i]
                    .iter()
                    .map(|&j| remap[j as usize])
                    .filter(|&j| j != u32::MAX)
                    .collect();
                r.sort_unstable();
                r
            })
            .collect();
        Self::from_rows(
            editors.iter().map(|&i| self.editors[i].clone()).collect(),
            items.iter().map(|&j| self.items[j].clone()).collect(),
            rows,
        )
        .expect("submatrix of a valid matrix is valid")
    }

    /// `editor_id,item_id` pairs, row-major.
    pub fn write_pairs<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["editor_id", "item_id"])?;
        for (i, j) in self.entries() {
            w.write_record([&self.editors[i], &self.items[j]])?;
        }
        w.flush().map_err(|e| Error::io("<pairs csv>", e))?;
        Ok(())
    }

    /// Reads pairs written by [`write_pairs`](Self::write_pairs) into the
    /// index space of `like` (ids unknown to `like` are an error).
    pub fn read_pairs_like<R: Read>(like: &Self, input: R) -> Result<Self> {
        let mut reader = csv_reader(input);
        check_header(&mut reader, &["editor_id", "item_id"])?;
        let mut out = like.empty_like();
        for row in reader.records() {
            let row = row.map_err(row_error)?;
            let i = like.editor_index(&row[0]).ok_or_else(|| Error::UnknownId {
                kind: "editor",
                id: row[0].to_string(),
            })?;
            let j = like.item_index(&row[1]).ok_or_else(|| Error::UnknownId {
                kind: "item",
                id: row[1].to_string(),
            })?;
            out.rows[i].push(j as u32);
        }
        for row in &mut out.rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(out)
    }

    /// Reads pairs into a fresh matrix with first-appearance orderings.
    pub fn read_pairs<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv_reader(input);
        check_header(&mut reader, &["editor_id", "item_id"])?;
        let mut b = Builder::default();
        for row in reader.records() {
            let row = row.map_err(row_error)?;
            b.push(&row[0], &row[1]);
        }
        b.finish()
    }
}

fn index_of(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), k).is_some() {
            return Err(Error::DuplicateKey(id.clone()));
        }
    }
    Ok(map)
}

#[derive(Default)]
pub(crate) struct Builder {
    editors: Vec<String>,
    items: Vec<String>,
    editor_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    rows: Vec<Vec<u32>>,
}

impl Builder {
    pub(crate) fn push(&mut self, editor: &str, item: &str) {
        let i = *self.editor_index.entry(editor.to_string()).or_insert_with(|| {
            self.editors.push(editor.to_string());
            self.rows.push(Vec::new());
            self.editors.len() - 1
        });
        let j = *self.item_index.entry(item.to_string()).or_insert_with(|| {
            self.items.push(item.to_string());
            self.items.len() - 1
        });
        self.rows[i].push(j as u32);
    }

    pub(crate) fn finish(self) -> Result<InteractionMatrix> {
        if self.editors.is_empty() {
            return Err(Error::EmptyInput("no interactions"));
        }
        InteractionMatrix::from_rows(self.editors, self.items, self.rows)
    }
}

/// Binarizes edit events; editors and items are ordered by first appearance.
pub fn build_matrix(events: &[EditEvent]) -> Result<InteractionMatrix> {
    let mut b = Builder::default();
    for e in events {
        b.push(&e.editor_id, &e.item_id);
    }
    b.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Repeat until both thresholds hold simultaneously.
    #[default]
    FixedPoint,
    /// Apply the editor threshold then the item threshold once.
    SinglePass,
}

/// Removes editors with fewer than `min_items_per_editor` items and items
/// with fewer than `min_editors_per_item` editors. Survivors keep their
/// relative order. The result may be empty (zero editors and items).
pub fn filter_active(
    m: &InteractionMatrix,
    min_items_per_editor: usize,
    min_editors_per_item: usize,
    mode: FilterMode,
) -> Result<InteractionMatrix> {
    if min_items_per_editor == 0 || min_editors_per_item == 0 {
        return Err(Error::InvalidArgument("thresholds must be at least 1".into()));
    }
    let mut editor_alive = vec![true; m.n_editors()];
    let mut item_alive = vec![true; m.n_items()];
    loop {
        let mut changed = false;
        for (i, row) in m.rows.iter().enumerate() {
            if !editor_alive[i] {
                continue;
            }
            let n = row.iter().filter(|&&j| item_alive[j as usize]).count();
            if n < min_items_per_editor {
                editor_alive[i] = false;
                changed = true;
            }
        }
        let mut deg = vec![0usize; m.n_items()];
        for (i, row) in m.rows.iter().enumerate() {
            if editor_alive[i] {
                for &j in row {
                    deg[j as usize] += 1;
                }
            }
        }
        for (j, alive) in item_alive.iter_mut().enumerate() {
            if *alive && deg[j] < min_editors_per_item {
                *alive = false;
                changed = true;
            }
        }
        if !changed || mode == FilterMode::SinglePass {
            break;
        }
    }
    let editors: Vec<usize> = (0..m.n_editors()).filter(|&i| editor_alive[i]).collect();
    let items: Vec<usize> = (0..m.n_items()).filter(|&j| item_alive[j]).collect();
    Ok(m.submatrix(&editors, &items))
}
