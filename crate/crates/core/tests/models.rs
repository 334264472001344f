use cohortshap::models::{
    fit_svm, fit_svm_smo, fit_tree, gini_impurity, default_gamma, MlpModel, Node, SvmParams, TreeParams,
};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error of the analytic gradient against central differences,
/// measured as `||g - fd|| / max(||g||, ||fd||)`.
fn gradient_error(model: &MlpModel, x: &Array2<f64>, y: &[f64]) -> f64 {
    let (_, grad) = model.loss_and_gradient(x.view(), y).unwrap();
    let theta = model.parameters();
    let eps = 1e-5;
    let mut probe = model.clone();
    let mut fd = vec![0.0; theta.len()];
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] = theta[k] + eps;
        probe.set_parameters(&t);
        let plus = probe.loss_and_gradient(x.view(), y).unwrap().0;
        t[k] = theta[k] - eps;
        probe.set_parameters(&t);
        let minus = probe.loss_and_gradient(x.view(), y).unwrap().0;
        fd[k] = (plus - minus) / (2.0 * eps);
    }
    let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm(&grad).max(norm(&fd)).max(1e-300)
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for draw in 0..12 {
        let p = rng.random_range(2..=6);
        let mut model = MlpModel::initialize(p, &[32, 32], draw).unwrap();
        // Move biases off zero so the draw is not just the initializer's.
        let theta: Vec<f64> = model.parameters().iter().map(|t| t + rng.random_range(-0.1..0.1)).collect();
        model.set_parameters(&theta);
        let n = rng.random_range(1..=8);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        let err = gradient_error(&model, &x, &y);
        assert!(err < 1e-4, "draw {draw}: relative error {err:e}");
    }
}

fn random_svm_problem(rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<f64>) {
    let n = rng.random_range(4..=40);
    let p = rng.random_range(1..=5);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
    let mut y: Vec<f64> = (0..n).map(|i| if x[[i, 0]] + rng.random_range(-1.5..1.5) > 0.0 { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (x, y)
}

#[test]
fn smo_reaches_kkt_with_non_decreasing_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for problem in 0..50 {
        let (x, y) = random_svm_problem(&mut rng);
        let c = [0.1, 1.0, 10.0][problem % 3];
        let fit = fit_svm(x.view(), &y, &SvmParams { c, ..Default::default() }).unwrap();
        assert!(fit.converged, "problem {problem} did not converge");
        let kkt = fit.max_kkt_violation(x.view(), &y).unwrap();
        assert!(kkt <= 1e-3, "problem {problem}: KKT violation {kkt:e}");
        assert!(fit.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        let equality: f64 = fit.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(equality.abs() < 1e-9 * c * y.len() as f64);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "problem {problem}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn smo_symmetric_pair_has_zero_decision_at_origin() {
    let x = array![[-1.0], [1.0]];
    let fit = fit_svm_smo(x.view(), &[-1.0, 1.0], 10.0, 0.5, 1e-3, 5).unwrap();
    assert!(fit.model.decision_value(&[0.0]).unwrap().abs() < 1e-6);
    assert!(default_gamma(x.view()) > 0.0);
}

/// Weighted child Gini of every admissible root split, enumerated directly.
fn best_root_split(x: &Array2<f64>, y: &[u8], min_leaf: usize) -> Option<(usize, f64)> {
    let n = y.len();
    let pos = y.iter().filter(|&&l| l == 1).count();
    let parent = n as f64 * gini_impurity(pos, n - pos).unwrap();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = x.column(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = (0..n).filter(|&i| x[[i, f]] <= thr).collect();
            let nl = left.len();
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let pl = left.iter().filter(|&&i| y[i] == 1).count();
            let impurity = nl as f64 * gini_impurity(pl, nl - pl).unwrap() + (n - nl) as f64 * gini_impurity(pos - pl, (n - nl) - (pos - pl)).unwrap();
            if best.is_none_or(|(b, _, _)| impurity < b - 1e-12) {
                best = Some((impurity, f, thr));
            }
        }
    }
    best.filter(|&(imp, _, _)| imp < parent - 1e-12).map(|(_, f, t)| (f, t))
}

#[test]
fn root_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..300 {
        let n = rng.random_range(2..=30);
        let p = rng.random_range(1..=4);
        let min_leaf = rng.random_range(1..=3);
        let x = Array2::from_shape_fn((n, p), |_| f64::from(rng.random_range(0..6u8)));
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let tree = fit_tree(x.view(), &y, TreeParams { min_leaf_size: min_leaf, features_per_split: p }, &mut rng).unwrap();
        let expected = if y.iter().all(|&l| l == y[0]) || n < 2 * min_leaf { None } else { best_root_split(&x, &y, min_leaf) };
        match (&tree.nodes()[0], expected) {
            (Node::Leaf { .. }, None) => {}
            (Node::Split { feature, threshold, .. }, Some((f, t))) => {
                assert_eq!((*feature, *threshold), (f, t), "case {case}");
            }
            (node, e) => panic!("case {case}: tree root {node:?}, oracle {e:?}"),
        }
    }
}

#[test]
fn trained_tree_structure_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.random_range(10..60);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = (0..n).map(|i| u8::from(x[[i, 0]] + rng.random_range(-0.5..0.5) > 0.0)).collect();
        let min_leaf = 2;
        let tree = fit_tree(x.view(), &y, TreeParams { min_leaf_size: min_leaf, features_per_split: 2 }, &mut rng).unwrap();
        let nodes = tree.nodes();
        for node in nodes {
            match *node {
                Node::Split { left, right, cover, .. } => assert_eq!(nodes[left].cover() + nodes[right].cover(), cover),
                Node::Leaf { value, cover } => {
                    assert!((0.0..=1.0).contains(&value));
                    assert!(cover >= min_leaf as f64);
                }
            }
        }
        assert_eq!(nodes[0].cover(), n as f64);
    }
}
