//! Dataset ingestion, train/test splitting, accuracy metrics, the evaluation
//! sweep and a synthetic dataset generator.

mod dataset;
mod experiment;
mod metrics;
pub mod synth;

pub use dataset::{ingest, split, split_indices, Dataset, SplitSpec};
pub use experiment::{compute_features, run_experiment, EvaluationReport, ReportRow, TrialResult};
pub use metrics::{accuracy, per_class_accuracy};
