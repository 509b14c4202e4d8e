use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, row_error};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// Deduplicated item graph. Entities and relations are indexed in
/// first-appearance order; `indexed` holds `(head, relation, tail)` indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleStore {
    triples: Vec<Triple>,
    indexed: Vec<(u32, u32, u32)>,
    present: HashSet<(u32, u32, u32)>,
    entities: Vec<String>,
    entity_index: HashMap<String, u32>,
    relations: Vec<String>,
    relation_index: HashMap<String, u32>,
    pub duplicates_dropped: usize,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut store = Self::new();
        for t in triples {
            store.insert(t);
        }
        store
    }

    /// Returns false (and counts a duplicate) if the triple is already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let h = intern(&mut self.entities, &mut self.entity_index, &triple.head);
        let r = intern(&mut self.relations, &mut self.relation_index, &triple.relation);
        let t = intern(&mut self.entities, &mut self.entity_index, &triple.tail);
        if !self.present.insert((h, r, t)) {
            self.duplicates_dropped += 1;
            return false;
        }
        self.indexed.push((h, r, t));
        self.triples.push(triple);
        true
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn indexed(&self) -> &[(u32, u32, u32)] {
        &self.indexed
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        match (
            self.entity_index.get(&triple.head),
            self.relation_index.get(&triple.relation),
            self.entity_index.get(&triple.tail),
        ) {
            (Some(&h), Some(&r), Some(&t)) => self.present.contains(&(h, r, t)),
            _ => false,
        }
    }

    pub fn contains_indexed(&self, h: u32, r: u32, t: u32) -> bool {
        self.present.contains(&(h, r, t))
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_index.get(name).copied()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["head_id", "property_id", "tail_id"])?;
        for t in &self.triples {
            w.write_record([&t.head, &t.relation, &t.tail])?;
        }
        w.flush().map_err(|e| Error::io("<relations csv>", e))?;
        Ok(())
    }
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&i) = index.get(name) {
        return i;
    }
    let i = names.len() as u32;
    names.push(name.to_string());
    index.insert(name.to_string(), i);
    i
}

/// Reads `head_id,property_id,tail_id` rows into a deduplicated store.
pub fn parse_relations<R: Read>(input: R) -> Result<TripleStore> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &["head_id", "property_id", "tail_id"])?;
    let mut store = TripleStore::new();
    for row in reader.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if let Some(col) = (0..3).find(|&c| row[c].is_empty()) {
            return Err(Error::Parse {
                line,
                message: format!("empty field in column {}", col + 1),
            });
        }
        store.insert(Triple::new(&row[0], &row[1], &row[2]));
    }
    Ok(store)
}
