use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, row_error};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemContentRecord {
    pub item_id: String,
    pub label: String,
    pub description: String,
}

/// Reads `item_id,label,description` rows. Order is preserved.
pub fn parse_content<R: Read>(input: R) -> Result<Vec<ItemContentRecord>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &["item_id", "label", "description"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let item_id = row[0].to_string();
        if item_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty item_id".into(),
            });
        }
        if !seen.insert(item_id.clone()) {
            return Err(Error::DuplicateKey(item_id));
        }
        out.push(ItemContentRecord {
            item_id,
            label: row[1].to_string(),
            description: row[2].to_string(),
        });
    }
    Ok(out)
}
