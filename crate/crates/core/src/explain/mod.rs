//! Shapley-value attribution.
//!
//! Tree models are explained exactly with path-dependent TreeSHAP; every other
//! model goes through a permutation-sampling estimator. A brute-force subset
//! enumeration is kept alongside as a reference for small feature counts.

mod oracle;
mod sampling;
mod treeshap;

use ndarray::ArrayView2;
use thiserror::Error;

use crate::models::{ModelError, TrainedModel};

pub use oracle::{exact_shap_oracle, exact_shapley, tree_value_function, MAX_ORACLE_FEATURES};
pub use sampling::{sampling_shap, SamplingOptions};
pub use treeshap::{forest_shap, tree_expected_value, tree_shap};

/// Tolerance of the local-accuracy gate applied to every explanation.
pub const LOCAL_ACCURACY_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("node {node} has non-positive cover")]
    ZeroCover { node: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exact enumeration needs p <= {max}, got {p}")]
    TooManyFeatures { p: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("no rows to explain")]
    NoRows,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("local accuracy violated: base + sum(phi) differs from f(x) by {gap:e}")]
    LocalAccuracy { gap: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, ExplainError>;

/// Additive attribution of one model output.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapExplanation {
    base_value: f64,
    contributions: Vec<f64>,
    model_output: f64,
}

impl ShapExplanation {
    /// Fails unless `base + sum(contributions)` reproduces `model_output`
    /// within [`LOCAL_ACCURACY_TOL`].
    pub fn new(base_value: f64, contributions: Vec<f64>, model_output: f64) -> Result<Self> {
        let gap = (base_value + contributions.iter().sum::<f64>() - model_output).abs();
        if gap.is_nan() || gap > LOCAL_ACCURACY_TOL {
            return Err(ExplainError::LocalAccuracy { gap });
        }
        Ok(ShapExplanation { base_value, contributions, model_output })
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    pub fn contributions(&self) -> &[f64] {
        &self.contributions
    }

    pub fn model_output(&self) -> f64 {
        self.model_output
    }

    /// `|base + sum(phi) - f(x)|`.
    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base_value + self.contributions.iter().sum::<f64>() - self.model_output).abs()
    }
}

/// Mean absolute contribution per feature over an evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector(Vec<f64>);

impl ImportanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ExplainError::InvalidParameter(format!("importance entry {v} is not a finite non-negative number")));
        }
        Ok(ImportanceVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Explain one row with the explainer appropriate for the model: TreeSHAP for
/// forests, permutation sampling against `background` otherwise.
pub fn explain_row(model: &TrainedModel, x: &[f64], background: ArrayView2<'_, f64>, opts: &SamplingOptions) -> Result<ShapExplanation> {
    if x.len() != model.n_features() {
        return Err(ExplainError::DimensionMismatch { expected: model.n_features(), found: x.len() });
    }
    match model {
        TrainedModel::Forest { forest } => forest_shap(forest, x),
        _ => sampling_shap(&|z: &[f64]| model.score_unchecked(z), x, background, opts),
    }
}

/// Per-feature mean of `|phi|` over `rows`.
pub fn mean_abs_shap(model: &TrainedModel, rows: ArrayView2<'_, f64>, background: ArrayView2<'_, f64>, opts: &SamplingOptions) -> Result<ImportanceVector> {
    if rows.nrows() == 0 {
        return Err(ExplainError::NoRows);
    }
    let explanations = rows
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.to_vec();
            // Every row gets its own substream so rows are interchangeable work units.
            let opts = SamplingOptions { seed: crate::seed::derive_seed(opts.seed, &[i as u64]), ..*opts };
            explain_row(model, &row, background, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_abs(&explanations, model.n_features()))
}

pub(crate) fn mean_abs(explanations: &[ShapExplanation], p: usize) -> ImportanceVector {
    let mut acc = vec![0.0; p];
    for e in explanations {
        for (a, c) in acc.iter_mut().zip(e.contributions()) {
            *a += c.abs();
        }
    }
    let n = explanations.len() as f64;
    ImportanceVector(acc.into_iter().map(|a| a / n).collect())
}

/// Explanation dump: one CSV record per (instance, feature).
pub fn write_explanations(explanations: &[(usize, ShapExplanation)], feature_names: &[String]) -> String {
    let mut out = String::from("instance,feature,contribution,base_value,model_output\n");
    for (row, e) in explanations {
        for (name, c) in feature_names.iter().zip(e.contributions()) {
            out.push_str(&format!("{row},{name},{c},{},{}\n", e.base_value(), e.model_output()));
        }
    }
    out
}
