use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};

/// Scores of one test fold, as fractions. The case label (1) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// No positive predictions; precision reported as 0.
    pub precision_degenerate: bool,
    /// No positive truths; recall reported as 0.
    pub recall_degenerate: bool,
}

pub fn evaluate_fold(predictions: &[u8], truth: &[u8]) -> Result<FoldMetrics> {
    if predictions.len() != truth.len() {
        return Err(PipelineError::LengthMismatch { left: predictions.len(), right: truth.len() });
    }
    if truth.is_empty() {
        return Err(PipelineError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => return Err(PipelineError::NonBinaryLabel { index: 0, value: p.max(t) }),
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(FoldMetrics {
        accuracy: (tp + tn) as f64 / truth.len() as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        precision_degenerate: tp + fp == 0,
        recall_degenerate: tp + fn_ == 0,
    })
}

/// Mean and population standard deviation, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
}

impl MetricStat {
    fn from_fractions(values: impl Iterator<Item = f64> + Clone) -> MetricStat {
        let n = values.clone().count() as f64;
        let mean = values.clone().map(|v| v * 100.0).sum::<f64>() / n;
        let var = values.map(|v| (v * 100.0 - mean).powi(2)).sum::<f64>() / n;
        MetricStat { mean, std: var.sqrt() }
    }
}

/// Pooled accuracy, precision and recall over every evaluated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: MetricStat,
    pub precision: MetricStat,
    pub recall: MetricStat,
    pub count: usize,
    pub degenerate_precision: usize,
    pub degenerate_recall: usize,
}

impl MetricSummary {
    pub fn from_folds(folds: &[FoldMetrics]) -> Result<MetricSummary> {
        if folds.is_empty() {
            return Err(PipelineError::Empty);
        }
        Ok(MetricSummary {
            accuracy: MetricStat::from_fractions(folds.iter().map(|f| f.accuracy)),
            precision: MetricStat::from_fractions(folds.iter().map(|f| f.precision)),
            recall: MetricStat::from_fractions(folds.iter().map(|f| f.recall)),
            count: folds.len(),
            degenerate_precision: folds.iter().filter(|f| f.precision_degenerate).count(),
            degenerate_recall: folds.iter().filter(|f| f.recall_degenerate).count(),
        })
    }
}
