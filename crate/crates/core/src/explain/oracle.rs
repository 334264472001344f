use super::treeshap::check_covers;
use super::{ExplainError, Result, ShapExplanation};
use crate::models::{Node, Tree};

/// Largest feature count the subset enumeration accepts.
pub const MAX_ORACLE_FEATURES: usize = 20;

/// Expected tree output when the features flagged in `subset` are fixed to
/// `x` and the rest follow the training distribution recorded in the covers.
pub fn tree_value_function(tree: &Tree, x: &[f64], subset: &[bool]) -> Result<f64> {
    if x.len() != tree.n_features() || subset.len() != tree.n_features() {
        return Err(ExplainError::DimensionMismatch { expected: tree.n_features(), found: x.len().min(subset.len()) });
    }
    check_covers(tree)?;
    Ok(value(tree.nodes(), x, 0, &|f| subset[f]))
}

fn value(nodes: &[Node], x: &[f64], i: usize, in_s: &dyn Fn(usize) -> bool) -> f64 {
    match nodes[i] {
        Node::Leaf { value, .. } => value,
        Node::Split { feature, threshold, left, right, cover } => {
            if in_s(feature) {
                value(nodes, x, if x[feature] <= threshold { left } else { right }, in_s)
            } else {
                (nodes[left].cover() * value(nodes, x, left, in_s) + nodes[right].cover() * value(nodes, x, right, in_s)) / cover
            }
        }
    }
}

/// Classic Shapley values of a set function over `p` players, with the
/// coalition encoded as a bitmask. Returns `(v(empty), phi)`.
pub fn exact_shapley(p: usize, v: impl Fn(u32) -> f64) -> Result<(f64, Vec<f64>)> {
    if p > MAX_ORACLE_FEATURES {
        return Err(ExplainError::TooManyFeatures { p, max: MAX_ORACLE_FEATURES });
    }
    let values: Vec<f64> = (0..1u32 << p).map(&v).collect();
    // |S|!(p-|S|-1)!/p! = 1 / (p * C(p-1, |S|))
    let weights: Vec<f64> = (0..p.max(1))
        .map(|s| {
            let mut binom = 1.0;
            for k in 0..s {
                binom = binom * (p - 1 - k) as f64 / (k + 1) as f64;
            }
            1.0 / (p as f64 * binom)
        })
        .collect();
    let mut phi = vec![0.0; p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..1u32 << p {
            if s & bit == 0 {
                *phi_j += weights[s.count_ones() as usize] * (values[(s | bit) as usize] - values[s as usize]);
            }
        }
    }
    Ok((values[0], phi))
}

/// Reference Shapley values for a tree ensemble by full subset enumeration.
/// `v` is the mean over `trees` of [`tree_value_function`].
pub fn exact_shap_oracle(trees: &[Tree], x: &[f64]) -> Result<ShapExplanation> {
    let first = trees.first().ok_or_else(|| ExplainError::InvalidParameter("no trees".into()))?;
    let p = first.n_features();
    for t in trees {
        if t.n_features() != x.len() {
            return Err(ExplainError::DimensionMismatch { expected: t.n_features(), found: x.len() });
        }
        check_covers(t)?;
    }
    let n = trees.len() as f64;
    let (base, phi) = exact_shapley(p, |mask| {
        let in_s = |f: usize| mask >> f & 1 == 1;
        trees.iter().map(|t| value(t.nodes(), x, 0, &in_s)).sum::<f64>() / n
    })?;
    let output = trees.iter().map(|t| t.predict(x)).sum::<std::result::Result<f64, _>>()? / n;
    ShapExplanation::new(base, phi, output)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold: 5.0, left: 1, right: 2, cover: 100.0 },
                Node::Leaf { value: 0.1, cover: 60.0 },
                Node::Leaf { value: 0.9, cover: 40.0 },
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn stump_value_function() {
        let t = stump();
        assert_eq!(tree_value_function(&t, &[7.0], &[true]).unwrap(), 0.9);
        assert!((tree_value_function(&t, &[7.0], &[false]).unwrap() - 0.42).abs() < 1e-15);
    }

    #[test]
    fn stump_oracle() {
        let e = exact_shap_oracle(&[stump()], &[7.0]).unwrap();
        assert!((e.contributions()[0] - 0.48).abs() < 1e-15);
        assert!((e.base_value() - 0.42).abs() < 1e-15);
    }

    #[test]
    fn constant_leaf_for_any_subset() {
        let t = Tree::from_nodes(vec![Node::Leaf { value: 0.25, cover: 3.0 }], 2).unwrap();
        for s in [[false, false], [true, false], [true, true]] {
            assert_eq!(tree_value_function(&t, &[0.0, 1.0], &s).unwrap(), 0.25);
        }
        let e = exact_shap_oracle(&[t], &[0.0, 1.0]).unwrap();
        assert_eq!(e.contributions(), &[0.0, 0.0]);
    }

    #[test]
    fn depth_two_tree_by_hand() {
        // Root on x0 (cover 10), left child on x1 (cover 6) with leaves 0.0/1.0
        // (covers 2/4), right leaf 0.5 (cover 4). x = (0, 9) reaches leaf 1.0.
        let t = Tree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold: 1.0, left: 1, right: 4, cover: 10.0 },
                Node::Split { feature: 1, threshold: 3.0, left: 2, right: 3, cover: 6.0 },
                Node::Leaf { value: 0.0, cover: 2.0 },
                Node::Leaf { value: 1.0, cover: 4.0 },
                Node::Leaf { value: 0.5, cover: 4.0 },
            ],
            2,
        )
        .unwrap();
        let x = [0.0, 9.0];
        // v(empty) = 0.6*(4/6) + 0.4*0.5 = 0.6, v({0}) = 4/6, v({1}) = 0.6*1 + 0.4*0.5 = 0.8, v({0,1}) = 1.
        let v0 = 0.6;
        let v_a = 4.0 / 6.0;
        let v_b = 0.8;
        let v_ab = 1.0;
        assert!((tree_value_function(&t, &x, &[true, false]).unwrap() - v_a).abs() < 1e-15);
        assert!((tree_value_function(&t, &x, &[false, true]).unwrap() - v_b).abs() < 1e-15);
        let phi0 = 0.5 * (v_a - v0) + 0.5 * (v_ab - v_b);
        let phi1 = 0.5 * (v_b - v0) + 0.5 * (v_ab - v_a);
        let e = exact_shap_oracle(&[t], &x).unwrap();
        assert!((e.contributions()[0] - phi0).abs() < 1e-15);
        assert!((e.contributions()[1] - phi1).abs() < 1e-15);
        assert!(e.local_accuracy_gap() < 1e-15);
    }

    #[test]
    fn too_many_features() {
        assert_eq!(exact_shapley(21, |_| 0.0), Err(ExplainError::TooManyFeatures { p: 21, max: 20 }));
    }

    #[test]
    fn additive_game() {
        let (base, phi) = exact_shapley(3, |m| (0..3).filter(|j| m >> j & 1 == 1).map(|j| (j + 1) as f64).sum()).unwrap();
        assert_eq!(base, 0.0);
        for (j, v) in phi.iter().enumerate() {
            assert!((v - (j + 1) as f64).abs() < 1e-14);
        }
    }
}
