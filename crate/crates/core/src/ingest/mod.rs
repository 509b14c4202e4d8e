//! Dump-derived tables, cleaning rules, the interaction matrix, splits and
//! dataset statistics.

mod content;
mod edits;
mod matrix;
mod relations;
mod split;
mod stats;

pub use content::{parse_content, ItemContentRecord};
pub use edits::{parse_edits, remove_outliers, EditEvent, OutlierReport};
pub use matrix::{build_matrix, filter_active, FilterMode, InteractionMatrix};
pub use relations::{parse_relations, Triple, TripleStore};
pub use split::{split_holdout, Split, SplitSpec};
pub use stats::{sparsity, stats, DatasetStats, Summary};

use crate::error::{Error, Result};

pub(crate) fn check_header(reader: &mut csv::Reader<impl std::io::Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

pub(crate) fn csv_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input)
}

/// Maps a csv error onto a parse error carrying the offending line.
pub(crate) fn row_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}
