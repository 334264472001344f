//! The end-to-end evaluation procedure: balanced subgroups, stratified k-fold
//! cross-validation, pooled metrics and softmax-normalized importance ranking.

mod experiment;
mod importance;
mod metrics;
mod report;
mod split;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::explain::ExplainError;

pub use experiment::{plan_cells, run_experiment, CellCoord, CellResult, ExperimentConfig, ExperimentResult};
pub use importance::{aggregate_importance, softmax, RankedFeature, RankedImportanceReport};
pub use metrics::{evaluate_fold, FoldMetrics, MetricStat, MetricSummary};
pub use report::{format_mean_std, format_report, format_weight, round_half_away};
pub use split::{kfold_split, make_balanced_subgroups, SubgroupPlan};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("class {class} has no samples")]
    EmptyClass { class: u8 },
    #[error("{majority} controls cannot be split into groups of {minority} cases")]
    MajorityTooSmall { minority: usize, majority: usize },
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    ClassSmallerThanK { class: u8, count: usize, k: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("nothing to aggregate")]
    Empty,
    #[error("non-finite importance entry at position {index}")]
    NonFinite { index: usize },
    #[error("label {value} at position {index} is not binary")]
    NonBinaryLabel { index: usize, value: u8 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weights sum to {total}, not 100")]
    WeightConservation { total: f64 },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("cell (subgroup {subgroup}, fold {fold}, state {state}): {source}")]
    Cell {
        subgroup: usize,
        fold: usize,
        state: usize,
        #[source]
        source: ExplainError,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;
