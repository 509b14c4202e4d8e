//! Per-editor ranking protocol, top-k metrics and sparsity slicing.

mod metrics;
mod protocol;
mod report;
mod slices;

pub use metrics::{average_recall_at_k, catalog_coverage, intra_list_diversity, mean_average_recall, precision_at_k, recall_at_k};
pub use protocol::{
    evaluate, evaluate_editor, fold_in_editor, EditorEvaluation, EvalData, FoldInConfig, ModelBundle, ProtocolConfig,
};
pub use report::{MetricsReport, ReportMeta};
pub use slices::{sparsity_range, sparsity_slices, Slice, SLICE_TOLERANCE};
