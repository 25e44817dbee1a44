//! Fruit disease identification from color images.
//!
//! The pipeline stages are:
//!
//! 1. **imageio** – decoding, pixel buffers, RGB → HSV / L\*a\*b\* conversion.
//! 2. **segmentation** – K-means on the (a\*, b\*) plane and selection of the
//!    defect cluster as a binary mask.
//! 3. **features** – GCH, CCV, LBP and CLBP descriptors over the masked region.
//! 4. **classify** – one-vs-one linear SVMs with ±1/0 ID-table decoding.
//! 5. **eval** – dataset ingestion, M-per-class holdout, accuracy sweeps and a
//!    synthetic dataset generator.

pub mod classify;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod imageio;
pub mod pipeline;
pub mod seed;
pub mod segmentation;

pub use classify::{
    build_id_table, decode, predict, train_binary, train_multiclass, BinarySvm, DecodeMetric,
    IdTable, MsvmModel, Prediction,
};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use eval::{
    accuracy, ingest, per_class_accuracy, run_experiment, split, Dataset, EvaluationReport,
    SplitSpec,
};
pub use features::{
    ccv, clbp_histogram, extract, gch, lbp_code, lbp_histogram, CcvParams, DescriptorId,
    DescriptorKind, FeatureColorSpace, FeatureVector, LbpParams, MagnitudeThreshold, Tau,
};
pub use imageio::{load_image, rgb_to_hsv, rgb_to_lab, split_channels, ChannelPlane, ColorSpace, Mask, RasterImage};
pub use segmentation::{
    apply_mask, kmeans_ab, select_defect_cluster, ClusterSelectionPolicy, KMeansConfig,
    SegmentationResult,
};
