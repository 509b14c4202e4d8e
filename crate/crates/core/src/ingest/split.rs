use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::error::{Error, Result};
use crate::math::round_half_up;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub seed: u64,
    /// Editors with an item count in `[cold_start_min, cold_start_max]`
    /// go to the test split only. Set `cold_start_max < cold_start_min`
    /// to disable.
    pub cold_start_min: usize,
    pub cold_start_max: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            validation_fraction_of_train: 0.1,
            seed: 0,
            cold_start_min: 2,
            cold_start_max: 6,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_fraction", self.train_fraction),
            ("validation_fraction_of_train", self.validation_fraction_of_train),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in (0,1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_cold_start(&self, n_items: usize) -> bool {
        (self.cold_start_min..=self.cold_start_max).contains(&n_items)
    }
}

/// Train/validation/test matrices share the input's editor and item index
/// space.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub cold_start: Vec<String>,
    /// Editors with a single item, kept whole in train.
    pub train_only: Vec<String>,
}

/// Per-editor hold-out. Editors are visited in matrix order and shuffled
/// with one seeded stream, so identical input and seed give identical splits.
pub fn split_holdout(m: &InteractionMatrix, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let mut train = Vec::with_capacity(m.n_editors());
    let mut validation = Vec::with_capacity(m.n_editors());
    let mut test = Vec::with_capacity(m.n_editors());
    let mut cold_start = Vec::new();
    let mut train_only = Vec::new();
    // guards against 0.1 * 5 landing a hair under 0.5
    const EPS: f64 = 1e-9;
    for (i, row) in m.rows().iter().enumerate() {
        let n = row.len();
        if spec.is_cold_start(n) {
            cold_start.push(m.editors()[i].clone());
            train.push(Vec::new());
            validation.push(Vec::new());
            test.push(row.clone());
            continue;
        }
        if n < 2 {
            if n == 1 {
                log::info!("editor {} has a single item; kept in train", m.editors()[i]);
                train_only.push(m.editors()[i].clone());
            }
            train.push(row.clone());
            validation.push(Vec::new());
            test.push(Vec::new());
            continue;
        }
        let mut shuffled = row.clone();
        shuffled.shuffle(&mut rng);
        let n_test = round_half_up((1.0 - spec.train_fraction) * n as f64 + EPS).clamp(1, n - 1);
        let rest = n - n_test;
        let n_val = round_half_up(spec.validation_fraction_of_train * rest as f64 + EPS).min(rest - 1);
        let mut t = shuffled[..n_test].to_vec();
        let mut v = shuffled[n_test..n_test + n_val].to_vec();
        let mut tr = shuffled[n_test + n_val..].to_vec();
        t.sort_unstable();
        v.sort_unstable();
        tr.sort_unstable();
        test.push(t);
        validation.push(v);
        train.push(tr);
    }
    let make = |rows| InteractionMatrix::from_rows(m.editors().to_vec(), m.items().to_vec(), rows);
    Ok(Split {
        train: make(train)?,
        validation: make(validation)?,
        test: make(test)?,
        cold_start,
        train_only,
    })
}
