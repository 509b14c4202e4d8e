use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense `rows × dim` float32 matrix with one identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite value in row {}", k / dim.max(1))));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::DuplicateKey(id.clone()));
            }
        }
        Ok(EmbeddingMatrix { ids, dim, data, index })
    }

    pub fn zeros(ids: Vec<String>, dim: usize) -> Self {
        let n = ids.len();
        Self::new(ids, dim, vec![0.0; n * dim]).expect("zeros are valid")
    }

    pub fn from_f64(ids: Vec<String>, dim: usize, data: &[f64]) -> Result<Self> {
        Self::new(ids, dim, data.iter().map(|&v| v as f32).collect())
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index_of(id).map(|i| self.row(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Rows reordered to follow `ids`; ids missing here get a zero row.
    /// Returns the matrix and the number of missing ids.
    pub fn align_to(&self, ids: &[String]) -> (EmbeddingMatrix, usize) {
        let mut data = vec![0.0f32; ids.len() * self.dim];
        let mut missing = 0;
        for (k, id) in ids.iter().enumerate() {
            match self.get(id) {
                Some(row) => data[k * self.dim..(k + 1) * self.dim].copy_from_slice(row),
                None => missing += 1,
            }
        }
        let m = EmbeddingMatrix::new(ids.to_vec(), self.dim, data).expect("aligned ids are unique");
        (m, missing)
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f32) -> EmbeddingMatrix {
        EmbeddingMatrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn mean_row_norm(&self) -> f64 {
        if self.rows() == 0 {
            return 0.0;
        }
        (0..self.rows())
            .map(|i| crate::math::dot_f32(self.row(i), self.row(i)).sqrt())
            .sum::<f64>()
            / self.rows() as f64
    }
}
