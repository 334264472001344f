use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Columns, Tree, TreeParams};
use super::{ModelError, Result};
use crate::seed::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf_size: usize,
    /// `None` resolves to `ceil(sqrt(p))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, min_leaf_size: 2, features_per_split: None, bootstrap: true }
    }
}

impl ForestParams {
    pub fn tree_params(&self, n_features: usize) -> TreeParams {
        let k = self
            .features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1));
        TreeParams { min_leaf_size: self.min_leaf_size, features_per_split: k }
    }
}

/// Bagged CART ensemble; the score is the mean of the reached-leaf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    params: ForestParams,
    seed: u64,
    n_features: usize,
}

/// Train `params.n_trees` trees, each on its own bootstrap resample drawn
/// from the substream `(seed, TREE, tree index)`.
///
/// Trees are fitted in parallel; the result does not depend on scheduling.
pub fn fit_forest(x: ArrayView2<'_, f64>, y: &[u8], params: ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(ModelError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let data = Columns::new(x, y)?;
    let n = data.n_rows();
    let tree_params = params.tree_params(data.n_features());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, &[tags::TREE, t as u64]);
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(&data, &samples, tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, params, seed, n_features: data.n_features() })
}

impl ForestModel {
    /// Assemble a forest from already-built trees (all over the same feature count).
    pub fn from_trees(trees: Vec<Tree>, params: ForestParams, seed: u64) -> Result<ForestModel> {
        let n_features = trees.first().map(Tree::n_features).ok_or(ModelError::EmptyInput)?;
        if let Some(t) = trees.iter().find(|t| t.n_features() != n_features) {
            return Err(ModelError::DimensionMismatch { expected: n_features, found: t.n_features() });
        }
        Ok(ForestModel { trees, params, seed, n_features })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Probability of the case class, in `[0, 1]`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(ModelError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::{fit_tree, Node};
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let x = Array2::from_shape_fn((n, 4), |_| rng.random::<f64>());
        let y = (0..n).map(|i| u8::from(x[[i, 0]] + 0.3 * x[[i, 2]] > 0.6)).collect();
        (x, y)
    }

    #[test]
    fn single_tree_without_bootstrap_matches_fit_tree() {
        let (x, y) = toy();
        let params = ForestParams { n_trees: 1, bootstrap: false, features_per_split: Some(4), ..Default::default() };
        let forest = fit_forest(x.view(), &y, params, 11).unwrap();
        let mut rng = seed::stream(11, &[tags::TREE, 0]);
        let tree = fit_tree(x.view(), &y, params.tree_params(4), &mut rng).unwrap();
        for row in x.rows() {
            let row = row.to_vec();
            assert_eq!(forest.predict_proba(&row).unwrap(), tree.predict(&row).unwrap());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = toy();
        let params = ForestParams { n_trees: 15, ..Default::default() };
        let a = fit_forest(x.view(), &y, params, 5).unwrap();
        let b = fit_forest(x.view(), &y, params, 5).unwrap();
        assert_eq!(a, b);
        for row in x.rows() {
            let row = row.to_vec();
            assert_eq!(a.predict_proba(&row).unwrap().to_bits(), b.predict_proba(&row).unwrap().to_bits());
        }
    }

    #[test]
    fn constant_positive_labels() {
        let (x, _) = toy();
        let forest = fit_forest(x.view(), &vec![1; x.nrows()], ForestParams { n_trees: 5, ..Default::default() }, 1).unwrap();
        assert!(x.rows().into_iter().all(|r| forest.predict_proba(&r.to_vec()).unwrap() == 1.0));
    }

    #[test]
    fn mean_of_two_trees() {
        let stump = |lo: f64, hi: f64| {
            Tree::from_nodes(
                vec![
                    Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2, cover: 2.0 },
                    Node::Leaf { value: lo, cover: 1.0 },
                    Node::Leaf { value: hi, cover: 1.0 },
                ],
                1,
            )
            .unwrap()
        };
        let forest = ForestModel::from_trees(vec![stump(0.2, 0.9), stump(0.6, 0.1)], ForestParams::default(), 0).unwrap();
        let p = forest.predict_proba(&[-1.0]).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        assert_eq!(forest.predict_label(&[-1.0]).unwrap(), 0);
        assert!(matches!(forest.predict_proba(&[]), Err(ModelError::DimensionMismatch { expected: 1, found: 0 })));
    }

    #[test]
    fn default_features_per_split_is_ceil_sqrt() {
        assert_eq!(ForestParams::default().tree_params(93).features_per_split, 10);
        assert_eq!(ForestParams::default().tree_params(105).features_per_split, 11);
        assert_eq!(ForestParams::default().tree_params(12).features_per_split, 4);
        assert_eq!(ForestParams::default().tree_params(1).features_per_split, 1);
    }

    #[test]
    fn zero_trees_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(fit_forest(x.view(), &[0, 1], ForestParams { n_trees: 0, ..Default::default() }, 0).is_err());
    }
}
