use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::explain::ImportanceVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Percent.
    pub weight: f64,
}

/// Features in descending weight order; weights sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedImportanceReport {
    pub entries: Vec<RankedFeature>,
}

impl RankedImportanceReport {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn top(&self, k: usize) -> &[RankedFeature] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// 1-based rank of `name`.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name).map(|i| i + 1)
    }
}

/// `exp(v_j - max v) / sum_i exp(v_i - max v)`.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Softmax each vector, average the normalized vectors, convert to percent and
/// rank descending (ties by feature name).
pub fn aggregate_importance(vectors: &[ImportanceVector], names: &[String]) -> Result<RankedImportanceReport> {
    let first = vectors.first().ok_or(PipelineError::Empty)?;
    if names.len() != first.len() {
        return Err(PipelineError::LengthMismatch { left: names.len(), right: first.len() });
    }
    let mut mean = vec![0.0; names.len()];
    for v in vectors {
        if v.len() != names.len() {
            return Err(PipelineError::LengthMismatch { left: names.len(), right: v.len() });
        }
        if let Some(index) = v.values().iter().position(|x| !x.is_finite()) {
            return Err(PipelineError::NonFinite { index });
        }
        for (m, w) in mean.iter_mut().zip(softmax(v.values())) {
            *m += w;
        }
    }
    let n = vectors.len() as f64;
    let mut entries: Vec<RankedFeature> =
        names.iter().zip(mean).map(|(name, m)| RankedFeature { name: name.clone(), weight: 100.0 * m / n }).collect();
    entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.name.cmp(&b.name)));
    let report = RankedImportanceReport { entries };
    let total = report.total();
    if (total - 100.0).abs() > 1e-6 {
        return Err(PipelineError::WeightConservation { total });
    }
    Ok(report)
}
