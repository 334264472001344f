//! CART classification trees grown on Gini impurity.

use std::cmp::Ordering;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_matrix, ModelError, Result};

/// `1 - p+^2 - p-^2` for a node holding the given class counts.
pub fn gini_impurity(pos_count: usize, neg_count: usize) -> Result<f64> {
    let total = pos_count + neg_count;
    if total == 0 {
        return Err(ModelError::EmptyInput);
    }
    let p = pos_count as f64 / total as f64;
    let q = neg_count as f64 / total as f64;
    Ok(1.0 - p * p - q * q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    /// `value` is the fraction of positive training samples reaching the leaf.
    Leaf { value: f64, cover: f64 },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// A binary tree stored as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    /// Build a tree from explicit nodes. Children must come after their parent.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(ModelError::InvalidTree("no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, threshold, .. } = *node {
                if feature >= n_features {
                    return Err(ModelError::InvalidTree(format!("node {i} splits on feature {feature} of {n_features}")));
                }
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() || left == right {
                    return Err(ModelError::InvalidTree(format!("node {i} has invalid children ({left}, {right})")));
                }
                if threshold.is_nan() {
                    return Err(ModelError::InvalidTree(format!("node {i} has a NaN threshold")));
                }
            }
        }
        Ok(Tree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf `x` lands in.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(ModelError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_features];
        for node in &self.nodes {
            if let Node::Split { feature, .. } = *node {
                used[feature] = true;
            }
        }
        used
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf_size: usize,
    /// Candidate features drawn (without replacement) at every node.
    pub features_per_split: usize,
}

/// Column-major copy of the training matrix shared by every tree of a forest.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Columns {
    pub(crate) fn new(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<Self> {
        check_matrix(x, y.len())?;
        if let Some(&l) = y.iter().find(|&&l| l > 1) {
            return Err(ModelError::InvalidParameter(format!("label {l} is not binary")));
        }
        let cols = x.columns().into_iter().map(|c| c.to_vec()).collect();
        Ok(Columns { cols, labels: y.to_vec() })
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cols.len()
    }
}

/// Split quality `(pL^2+qL^2)/nL + (pR^2+qR^2)/nR` as an exact fraction.
///
/// Maximizing it minimizes the cover-weighted child Gini; keeping it in
/// integers makes ties and the "strictly positive decrease" rule exact.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn children(left_pos: u64, left_n: u64, right_pos: u64, right_n: u64) -> Self {
        let sq = |pos: u64, n: u64| {
            let neg = (n - pos) as u128;
            (pos as u128).pow(2) + neg * neg
        };
        SplitScore {
            num: sq(left_pos, left_n) * right_n as u128 + sq(right_pos, right_n) * left_n as u128,
            den: left_n as u128 * right_n as u128,
        }
    }

    fn parent(pos: u64, n: u64) -> Self {
        let neg = (n - pos) as u128;
        SplitScore { num: (pos as u128).pow(2) + neg * neg, den: n as u128 }
    }

    fn cmp(&self, other: &SplitScore) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    score: SplitScore,
    /// `score` as a float, used to skip the exact comparison unless near a tie.
    approx: f64,
    feature: usize,
    threshold: f64,
}

/// A distinct training row and how many times the resample drew it.
#[derive(Debug, Clone, Copy)]
struct Weighted {
    row: usize,
    count: u64,
}

struct Grower<'a, R> {
    data: &'a Columns,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    buf: Vec<(f64, u64, u64)>,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, samples: &mut [Weighted]) -> usize {
        let n: u64 = samples.iter().map(|s| s.count).sum();
        let pos: u64 = samples.iter().map(|s| s.count * u64::from(self.data.labels[s.row])).sum();
        let cover = n as f64;
        let leaf = Node::Leaf { value: pos as f64 / n as f64, cover };

        let min_leaf = self.params.min_leaf_size.max(1) as u64;
        if pos == 0 || pos == n || n < 2 * min_leaf {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        }

        let best = self.best_split(samples, pos, n, min_leaf);
        let Some(best) = best.filter(|b| b.score.cmp(&SplitScore::parent(pos, n)) == Ordering::Greater) else {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        };

        let col = &self.data.cols[best.feature];
        let mut split = 0;
        for k in 0..samples.len() {
            if col[samples[k].row] <= best.threshold {
                samples.swap(k, split);
                split += 1;
            }
        }

        let id = self.nodes.len();
        self.nodes.push(leaf);
        let (left_samples, right_samples) = samples.split_at_mut(split);
        let left = self.grow(left_samples);
        let right = self.grow(right_samples);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right, cover };
        id
    }

    fn best_split(&mut self, samples: &[Weighted], pos: u64, n: u64, min_leaf: u64) -> Option<Candidate> {
        let p = self.data.n_features();
        let k = self.params.features_per_split.clamp(1, p);
        let mut features: Vec<usize> = if k == p {
            (0..p).collect()
        } else {
            rand::seq::index::sample(self.rng, p, k).into_vec()
        };
        features.sort_unstable();

        let mut best: Option<Candidate> = None;
        for f in features {
            let col = &self.data.cols[f];
            self.buf.clear();
            self.buf.extend(samples.iter().map(|s| (col[s.row], s.count, s.count * u64::from(self.data.labels[s.row]))));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_pos = 0u64;
            let mut left_n = 0u64;
            for t in 0..self.buf.len() - 1 {
                let (lo, count, positives) = self.buf[t];
                left_n += count;
                left_pos += positives;
                let hi = self.buf[t + 1].0;
                if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let (rn, rp) = (n - left_n, pos - left_pos);
                let approx = approx_score(left_pos, left_n) + approx_score(rp, rn);
                let better = match &best {
                    None => true,
                    Some(b) if approx > b.approx * (1.0 + 1e-9) => true,
                    Some(b) if approx < b.approx * (1.0 - 1e-9) => false,
                    Some(b) => SplitScore::children(left_pos, left_n, rp, rn).cmp(&b.score) == Ordering::Greater,
                };
                if better {
                    let score = SplitScore::children(left_pos, left_n, rp, rn);
                    best = Some(Candidate { score, approx, feature: f, threshold: midpoint(lo, hi) });
                }
            }
        }
        best
    }
}

fn approx_score(pos: u64, n: u64) -> f64 {
    let (p, q) = (pos as f64, (n - pos) as f64);
    (p * p + q * q) / n as f64
}

/// A threshold strictly below `hi` and not below `lo`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// Grow a tree on `samples` (row indices, repeats allowed).
pub(crate) fn grow_tree<R: Rng>(data: &Columns, samples: &[usize], params: TreeParams, rng: &mut R) -> Result<Tree> {
    if samples.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let mut counts = vec![0u64; data.n_rows()];
    for &i in samples {
        counts[i] += 1;
    }
    let mut weighted: Vec<Weighted> =
        counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(row, &count)| Weighted { row, count }).collect();
    let mut grower = Grower { data, params, rng, nodes: Vec::new(), buf: Vec::with_capacity(weighted.len()) };
    grower.grow(&mut weighted);
    Ok(Tree { nodes: grower.nodes, n_features: data.n_features() })
}

/// Fit one tree on every row of `x` (no resampling).
pub fn fit_tree<R: Rng>(x: ArrayView2<'_, f64>, y: &[u8], params: TreeParams, rng: &mut R) -> Result<Tree> {
    let data = Columns::new(x, y)?;
    let samples: Vec<usize> = (0..data.n_rows()).collect();
    grow_tree(&data, &samples, params, rng)
}
