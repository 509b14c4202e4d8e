use std::path::Path;

use super::{TokenizedDoc, WordVectors};
use crate::error::{Error, Result};
use crate::mf::EmbeddingMatrix;
use crate::store;

#[derive(Debug, Clone, PartialEq)]
pub struct ContentVector {
    pub values: Vec<f64>,
    /// Set when no token was in the vocabulary and the zero vector was returned.
    pub fallback: bool,
}

/// Mean of the in-vocabulary token vectors.
pub fn content_repr(doc: &TokenizedDoc, wv: &WordVectors) -> ContentVector {
    let mut sum = vec![0.0; wv.dim];
    let mut n = 0usize;
    for t in &doc.tokens {
        if let Some(v) = wv.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return ContentVector {
            values: sum,
            fallback: true,
        };
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    ContentVector {
        values: sum,
        fallback: false,
    }
}

/// Content matrix with one row per document, plus the number of documents
/// that fell back to the zero vector.
pub fn content_matrix(docs: &[TokenizedDoc], wv: &WordVectors) -> Result<(EmbeddingMatrix, usize)> {
    let mut data = Vec::with_capacity(docs.len() * wv.dim);
    let mut fallbacks = 0;
    for doc in docs {
        let c = content_repr(doc, wv);
        fallbacks += c.fallback as usize;
        data.extend(c.values);
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} items have no in-vocabulary tokens; using zero content vectors");
    }
    let ids = docs.iter().map(|d| d.item_id.clone()).collect();
    Ok((EmbeddingMatrix::from_f64(ids, wv.dim, &data)?, fallbacks))
}

/// Loads externally computed content embeddings. With `catalog`, rows are
/// re-ordered to the catalog and catalog items absent from the file get a
/// zero row; the returned count is the number of such items.
pub fn import_external(
    path: impl AsRef<Path>,
    dim: usize,
    catalog: Option<&[String]>,
) -> Result<(EmbeddingMatrix, usize)> {
    let m = store::read_embeddings(path)?;
    if m.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: m.dim(),
        });
    }
    match catalog {
        None => Ok((m, 0)),
        Some(ids) => {
            let (aligned, missing) = m.align_to(ids);
            if missing > 0 {
                log::warn!("{missing} catalog items missing from external content embeddings");
            }
            Ok((aligned, missing))
        }
    }
}
