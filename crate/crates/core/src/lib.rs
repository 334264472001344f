//! Explainable classification for severely imbalanced cohorts.
//!
//! The crate is organised around the analysis pipeline it implements:
//!
//! - [`dataset`]: cohort tables parsed from fixed-width or delimited files (or
//!   synthesized), the `-1` missing-value sentinel and the feature-set partition.
//! - [`models`]: from-scratch random forest, RBF soft-margin SVM (SMO) and a
//!   two-hidden-layer ReLU regression network.
//! - [`explain`]: path-dependent TreeSHAP, an exhaustive Shapley oracle and a
//!   permutation-sampling explainer for the non-tree models.
//! - [`pipeline`]: balanced subgrouping, stratified k-fold evaluation, metric
//!   aggregation and softmax-normalized importance ranking.
//!
//! All randomness flows from explicit seeds through [`seed::derive_seed`], so
//! every result is reproducible regardless of thread scheduling.

pub mod dataset;
pub mod explain;
pub mod models;
pub mod pipeline;
pub mod seed;

pub use dataset::{Dataset, FeatureKind, FeatureSet, FeatureSpec};
pub use explain::{ImportanceVector, ShapExplanation};
pub use models::{ModelKind, TrainedModel};
pub use pipeline::{ExperimentConfig, MetricSummary, RankedImportanceReport};
