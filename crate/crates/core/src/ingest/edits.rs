use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, row_error};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditEvent {
    pub editor_id: String,
    pub item_id: String,
    pub timestamp: DateTime<Utc>,
    pub comment: String,
}

impl EditEvent {
    pub fn new(editor_id: &str, item_id: &str, timestamp: DateTime<Utc>, comment: &str) -> Self {
        EditEvent {
            editor_id: editor_id.into(),
            item_id: item_id.into(),
            timestamp,
            comment: comment.into(),
        }
    }
}

/// Accepts RFC 3339 (`2019-06-01T12:00:00Z`), the same without offset
/// (read as UTC, `T` or space separator) and bare dates (midnight UTC).
/// Sub-second precision is truncated.
pub(crate) fn parse_timestamp(value: &str) -> Option<DateTime<Utc>> {
    let ts = if let Ok(t) = DateTime::parse_from_rfc3339(value) {
        t.with_timezone(&Utc)
    } else if let Some(t) = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(value, f).ok())
    {
        t.and_utc()
    } else {
        NaiveDate::parse_from_str(value, "%Y-%m-%d")
            .ok()?
            .and_hms_opt(0, 0, 0)?
            .and_utc()
    };
    DateTime::from_timestamp(ts.timestamp(), 0)
}

/// Reads `editor_id,item_id,timestamp,comment` rows and sorts them by time
/// (stable, so ties keep input order).
pub fn parse_edits<R: Read>(input: R) -> Result<Vec<EditEvent>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &["editor_id", "item_id", "timestamp", "comment"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row[0].is_empty() || row[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty editor_id or item_id".into(),
            });
        }
        let timestamp = parse_timestamp(&row[2]).ok_or_else(|| Error::Timestamp {
            line,
            value: row[2].to_string(),
        })?;
        out.push(EditEvent::new(&row[0], &row[1], timestamp, &row[3]));
    }
    out.sort_by_key(|e| e.timestamp);
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutlierReport {
    /// Editors whose events were removed, in order of first appearance.
    pub removed_editors: Vec<String>,
    /// Peak number of edits inside any one-hour window, per removed editor.
    pub peak_rates: Vec<usize>,
}

/// Largest number of timestamps (seconds) inside any half-open window
/// `[t, t + 3600)`. `times` must be sorted.
pub(crate) fn peak_hourly_count(times: &[i64]) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..times.len() {
        while times[hi] - times[lo] >= 3600 {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

/// Drops every event of an editor whose peak one-hour edit count exceeds
/// `max_edits_per_hour`.
pub fn remove_outliers(events: &[EditEvent], max_edits_per_hour: f64) -> Result<(Vec<EditEvent>, OutlierReport)> {
    if !(max_edits_per_hour > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max_edits_per_hour must be positive, got {max_edits_per_hour}"
        )));
    }
    let mut order = Vec::new();
    let mut times: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for e in events {
        let entry = times.entry(&e.editor_id).or_default();
        if entry.is_empty() {
            order.push(e.editor_id.as_str());
        }
        entry.push(e.timestamp.timestamp());
    }
    let mut report = OutlierReport::default();
    let mut removed = HashSet::new();
    for editor in order {
        let ts = times.get_mut(editor).expect("editor recorded");
        ts.sort_unstable();
        let peak = peak_hourly_count(ts);
        if peak as f64 > max_edits_per_hour {
            log::info!("removing burst editor {editor}: {peak} edits within one hour");
            removed.insert(editor);
            report.removed_editors.push(editor.to_string());
            report.peak_rates.push(peak);
        }
    }
    let kept = events
        .iter()
        .filter(|e| !removed.contains(e.editor_id.as_str()))
        .cloned()
        .collect();
    Ok((kept, report))
}
