#![allow(dead_code)]

use cohortshap::models::{Node, Tree};
use rand::Rng;

/// A random tree of depth at most `max_depth` over `p` features. Leaf covers
/// are random and internal covers are the sums of their children.
pub fn random_tree<R: Rng>(rng: &mut R, p: usize, max_depth: usize) -> Tree {
    fn build<R: Rng>(rng: &mut R, nodes: &mut Vec<Node>, p: usize, depth: usize, max_depth: usize) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        let split = depth < max_depth && (depth == 0 || rng.random_bool(0.75));
        if !split {
            nodes[id] = Node::Leaf { value: rng.random_range(-1.0..1.0), cover: rng.random_range(1..50) as f64 };
            return id;
        }
        let feature = rng.random_range(0..p);
        let threshold = rng.random_range(-1.0..1.0);
        let left = build(rng, nodes, p, depth + 1, max_depth);
        let right = build(rng, nodes, p, depth + 1, max_depth);
        let cover = nodes[left].cover() + nodes[right].cover();
        nodes[id] = Node::Split { feature, threshold, left, right, cover };
        id
    }
    let mut nodes = Vec::new();
    build(rng, &mut nodes, p, 0, max_depth);
    Tree::from_nodes(nodes, p).expect("generated tree is well formed")
}

pub fn random_row<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-1.2..1.2)).collect()
}
