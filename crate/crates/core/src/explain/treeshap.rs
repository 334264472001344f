use super::{ExplainError, Result, ShapExplanation};
use crate::models::{ForestModel, Node, Tree};

#[derive(Debug, Clone, Copy, Default)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

pub(crate) fn check_covers(tree: &Tree) -> Result<()> {
    match tree.nodes().iter().position(|n| !(n.cover() > 0.0 && n.cover().is_finite())) {
        Some(node) => Err(ExplainError::ZeroCover { node }),
        None => Ok(()),
    }
}

/// `v(empty set)`: the cover-weighted mean of the leaf values.
pub fn tree_expected_value(tree: &Tree) -> Result<f64> {
    check_covers(tree)?;
    Ok(expected(tree.nodes(), 0))
}

fn expected(nodes: &[Node], i: usize) -> f64 {
    match nodes[i] {
        Node::Leaf { value, .. } => value,
        Node::Split { left, right, cover, .. } => {
            (nodes[left].cover() * expected(nodes, left) + nodes[right].cover() * expected(nodes, right)) / cover
        }
    }
}

// The path is the list of distinct features on the way from the root, each
// with the fraction of "zero" (unconditioned) and "one" (conditioned) flow;
// `weight` holds the permutation weights for every subset size.

fn extend(path: &mut [PathElem], depth: usize, zero: f64, one: f64, feature: usize, recip: &[f64]) {
    path[depth] = PathElem { feature, zero, one, weight: if depth == 0 { 1.0 } else { 0.0 } };
    let inv_d1 = recip[depth + 1];
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 * inv_d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 * inv_d1;
    }
}

fn unwind(path: &mut [PathElem], depth: usize, index: usize, recip: &[f64]) {
    let PathElem { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let inv_d1 = recip[depth + 1];
    let mut next = path[depth].weight;
    if one != 0.0 {
        let inv_one = 1.0 / one;
        for i in (0..depth).rev() {
            let tmp = path[i].weight;
            path[i].weight = next * d1 * recip[i + 1] * inv_one;
            next = tmp - path[i].weight * zero * (depth - i) as f64 * inv_d1;
        }
    } else {
        let inv_zero = 1.0 / zero;
        for i in (0..depth).rev() {
            path[i].weight = path[i].weight * d1 * inv_zero * recip[depth - i];
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

fn unwound_sum(path: &[PathElem], depth: usize, index: usize, recip: &[f64]) -> f64 {
    let PathElem { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let inv_d1 = recip[depth + 1];
    let mut total = 0.0;
    if one != 0.0 {
        let inv_one = 1.0 / one;
        let mut next = path[depth].weight;
        for i in (0..depth).rev() {
            let tmp = next * d1 * recip[i + 1] * inv_one;
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 * inv_d1;
        }
    } else {
        let inv_zero = 1.0 / zero;
        for i in (0..depth).rev() {
            total += path[i].weight * inv_zero * d1 * recip[depth - i];
        }
    }
    total
}

struct Walker<'a> {
    nodes: &'a [Node],
    x: &'a [f64],
    phi: &'a mut [f64],
    path: Vec<PathElem>,
    /// `recip[i] = 1 / i`.
    recip: Vec<f64>,
}

impl Walker<'_> {
    /// The parent's path lives at `path[parent..parent + len]`; this node's
    /// copy is written directly after it.
    fn recurse(&mut self, node: usize, parent: usize, len: usize, zero: f64, one: f64, feature: usize) {
        let start = parent + len;
        self.path.copy_within(parent..parent + len, start);
        let mut depth = len;
        extend(&mut self.path[start..], depth, zero, one, feature, &self.recip);

        match self.nodes[node] {
            Node::Leaf { value, .. } => {
                let path = &self.path[start..];
                for i in 1..=depth {
                    let w = unwound_sum(path, depth, i, &self.recip);
                    let e = path[i];
                    self.phi[e.feature] += w * (e.one - e.zero) * value;
                }
            }
            Node::Split { feature, threshold, left, right, cover } => {
                let (hot, cold) = if self.x[feature] <= threshold { (left, right) } else { (right, left) };
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..=depth).find(|&k| self.path[start + k].feature == feature) {
                    incoming_zero = self.path[start + k].zero;
                    incoming_one = self.path[start + k].one;
                    unwind(&mut self.path[start..], depth, k, &self.recip);
                    depth -= 1;
                }
                let hot_frac = self.nodes[hot].cover() / cover;
                let cold_frac = self.nodes[cold].cover() / cover;
                self.recurse(hot, start, depth + 1, incoming_zero * hot_frac, incoming_one, feature);
                self.recurse(cold, start, depth + 1, incoming_zero * cold_frac, 0.0, feature);
            }
        }
    }
}

/// Adds one tree's contributions for `x` into `phi`.
pub(crate) fn tree_shap_into(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    let d = tree.depth();
    let recip = (0..d + 4).map(|i| 1.0 / i as f64).collect();
    let mut walker = Walker { nodes: tree.nodes(), x, phi, path: vec![PathElem::default(); (d + 2) * (d + 3) / 2 + 1], recip };
    walker.recurse(0, 0, 0, 1.0, 1.0, NO_FEATURE);
}

/// Path-dependent TreeSHAP for a single tree.
pub fn tree_shap(tree: &Tree, x: &[f64]) -> Result<ShapExplanation> {
    if x.len() != tree.n_features() {
        return Err(ExplainError::DimensionMismatch { expected: tree.n_features(), found: x.len() });
    }
    let base = tree_expected_value(tree)?;
    let mut phi = vec![0.0; x.len()];
    tree_shap_into(tree, x, &mut phi);
    ShapExplanation::new(base, phi, tree.predict(x)?)
}

/// Mean of the per-tree explanations: per-tree vectors are summed in tree
/// order, then divided by the number of trees.
pub fn forest_shap(forest: &ForestModel, x: &[f64]) -> Result<ShapExplanation> {
    if x.len() != forest.n_features() {
        return Err(ExplainError::DimensionMismatch { expected: forest.n_features(), found: x.len() });
    }
    let p = x.len();
    let mut sum = vec![0.0; p];
    let mut one = vec![0.0; p];
    let mut base = 0.0;
    for tree in forest.trees() {
        base += tree_expected_value(tree)?;
        one.iter_mut().for_each(|v| *v = 0.0);
        tree_shap_into(tree, x, &mut one);
        for (s, v) in sum.iter_mut().zip(&one) {
            *s += v;
        }
    }
    let n = forest.trees().len() as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    ShapExplanation::new(base / n, sum, forest.predict_proba(x)?)
}
