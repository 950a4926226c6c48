//! Metrics, stratified cross-validation and the experiment matrix.

pub mod cv;
pub mod experiment;
pub mod metrics;

pub use cv::{stratified_kfold, train_indices};
pub use experiment::{
    config_hash, render_csv, render_table, run_experiment, verify_audit, AuditCall, AuditEntry, ExperimentConfig, ExperimentData, ExperimentReport,
    ExperimentRow, RowResult,
};
pub use metrics::{aggregate, confusion, metrics, ClassMetrics, ConfusionMatrix, FoldRecord, Metrics, MetricsReport};
