//! The three classifier families, trained from scratch, plus the scaler the
//! margin and gradient models consume.

pub mod forest;
pub mod mlp;
pub mod scaler;
pub mod svm;
pub mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use mlp::{fit_mlp, Dense, MlpModel, MlpParams};
pub use scaler::{fit_scaler, Scaler};
pub use svm::{default_gamma, fit_svm, fit_svm_smo, SvmFit, SvmModel, SvmParams};
pub use tree::{fit_tree, gini_impurity, Node, Tree, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no training rows")]
    EmptyInput,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn check_matrix(x: ArrayView2<'_, f64>, n_labels: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.nrows() != n_labels {
        return Err(ModelError::LabelMismatch { rows: x.nrows(), labels: n_labels });
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(ModelError::NonFinite { row, col });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Forest, ModelKind::Svm, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Forest => "Random Forest",
            ModelKind::Svm => "SVM",
            ModelKind::Mlp => "Neural Network",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "forest" | "rf" | "random_forest" => Ok(ModelKind::Forest),
            "svm" => Ok(ModelKind::Svm),
            "mlp" | "nn" | "neural_network" => Ok(ModelKind::Mlp),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub forest: ForestParams,
    pub svm: SvmParams,
    pub mlp: MlpParams,
}

/// A fitted classifier of any family, ready for scoring raw (unscaled) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest { forest: ForestModel },
    Svm { scaler: Scaler, svm: SvmModel },
    Mlp { scaler: Scaler, mlp: MlpModel },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Forest { .. } => ModelKind::Forest,
            TrainedModel::Svm { .. } => ModelKind::Svm,
            TrainedModel::Mlp { .. } => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Forest { forest } => forest.n_features(),
            TrainedModel::Svm { svm, .. } => svm.n_features(),
            TrainedModel::Mlp { mlp, .. } => mlp.n_features(),
        }
    }

    /// Forest probability, SVM decision value or network output.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), found: x.len() });
        }
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::Forest { forest } => forest.predict_unchecked(x),
            TrainedModel::Svm { scaler, svm } => {
                let mut z = vec![0.0; x.len()];
                scaler.transform_row(x, &mut z);
                svm.decision_unchecked(&z)
            }
            TrainedModel::Mlp { scaler, mlp } => {
                let mut z = vec![0.0; x.len()];
                scaler.transform_row(x, &mut z);
                mlp.predict_unchecked(&z)
            }
        }
    }

    /// Score at or above which the case label is predicted.
    pub fn threshold(&self) -> f64 {
        match self.kind() {
            ModelKind::Forest | ModelKind::Mlp => 0.5,
            ModelKind::Svm => 0.0,
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.score(x)? >= self.threshold()))
    }
}

/// Train one model. Forests see raw values (sentinels included); the SVM and
/// the network see rows standardized by a scaler fitted on `x` alone.
pub fn fit_model(kind: ModelKind, x: ArrayView2<'_, f64>, y: &[u8], hyper: &Hyperparameters, seed: u64) -> Result<TrainedModel> {
    match kind {
        ModelKind::Forest => Ok(TrainedModel::Forest { forest: fit_forest(x, y, hyper.forest, seed)? }),
        ModelKind::Svm => {
            let scaler = fit_scaler(x)?;
            let xs = scaler.transform(x)?;
            let signed: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
            let fit = fit_svm(xs.view(), &signed, &hyper.svm)?;
            Ok(TrainedModel::Svm { scaler, svm: fit.model })
        }
        ModelKind::Mlp => {
            let scaler = fit_scaler(x)?;
            let xs = scaler.transform(x)?;
            let target: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
            Ok(TrainedModel::Mlp { scaler, mlp: fit_mlp(xs.view(), &target, &hyper.mlp, seed)? })
        }
    }
}
