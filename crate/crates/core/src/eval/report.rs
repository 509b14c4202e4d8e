use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub dataset: String,
    pub model: String,
}

/// Aggregated metrics keyed `precision@5`, `recall@50`, `mar@5`,
/// `diversity@10`, `coverage@10`, ... plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub metrics: BTreeMap<String, f64>,
    pub meta: ReportMeta,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_editor: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Header row for a table of reports: `model` then the metric names.
    pub fn csv_header(&self) -> Vec<String> {
        std::iter::once("model".to_string())
            .chain(self.metrics.keys().cloned())
            .collect()
    }

    pub fn csv_row(&self) -> Vec<String> {
        std::iter::once(self.meta.model.clone())
            .chain(self.metrics.values().map(|v| format!("{v:.6}")))
            .collect()
    }
}
