//! Soft-margin RBF support vector classifier trained by sequential minimal
//! optimization.
//!
//! The solver maximizes the dual
//! `W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j)` subject to
//! `0 <= a_i <= C` and `sum a_i y_i = 0`. Each step picks the maximal
//! violating pair (Keerthi et al.) and solves the two-variable subproblem
//! analytically, so the dual objective never decreases. The stopping test is
//! the KKT gap `m(a) - M(a) <= tol`, which bounds every training point's KKT
//! violation by `tol` once the bias is placed inside `[M, m]`.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_matrix, ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// `None` resolves to `1 / (p * mean feature variance)` of the training matrix.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
    /// Cap on pair updates; `None` means `max(100_000, 100 n)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: None, tol: 1e-3, max_passes: 5, max_iter: None }
    }
}

/// `1 / (p * mean column variance)`; `1 / p` when every column is constant.
pub fn default_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return 1.0;
    }
    let mean_var = x
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n as f64;
            c.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64
        })
        .sum::<f64>()
        / p as f64;
    if mean_var > 0.0 {
        1.0 / (p as f64 * mean_var)
    } else {
        1.0 / p as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    support_vectors: Vec<Vec<f64>>,
    /// `a_i * y_i` for each retained support vector.
    dual_coef: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
    n_features: usize,
}

/// Solver output: the model plus the full multiplier vector and convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    /// Multiplier for every training point, zeros included.
    pub alphas: Vec<f64>,
    /// Dual objective at start, after every sweep of `n` pair updates, and at exit.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final KKT gap `m(a) - M(a)`.
    pub kkt_gap: f64,
}

fn rbf(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Train on standardized rows `x` with labels in `{-1, +1}`.
pub fn fit_svm_smo(x: ArrayView2<'_, f64>, y: &[f64], c: f64, gamma: f64, tol: f64, max_passes: usize) -> Result<SvmFit> {
    let max_iter = (100 * x.nrows()).max(100_000);
    fit_svm_smo_capped(x, y, c, gamma, tol, max_passes, max_iter)
}

pub fn fit_svm(x: ArrayView2<'_, f64>, y: &[f64], params: &SvmParams) -> Result<SvmFit> {
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
    let max_iter = params.max_iter.unwrap_or_else(|| (100 * x.nrows()).max(100_000));
    fit_svm_smo_capped(x, y, params.c, gamma, params.tol, params.max_passes, max_iter)
}

fn fit_svm_smo_capped(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    max_passes: usize,
    max_iter: usize,
) -> Result<SvmFit> {
    check_matrix(x, y.len())?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("C must be positive and finite, got {c}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("gamma must be positive and finite, got {gamma}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(ModelError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(ModelError::InvalidParameter(format!("SVM labels must be -1 or +1, got {bad}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(ModelError::SingleClass);
    }

    let n = y.len();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(gamma, &rows[i], &rows[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let k = |i: usize, j: usize| kernel[i * n + j];

    let eps = 1e-12 * c;
    let mut alpha = vec![0.0; n];
    // grad[t] = (Q a)_t - 1
    let mut grad = vec![-1.0; n];
    let objective = |alpha: &[f64], grad: &[f64]| 0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let select = |alpha: &[f64], grad: &[f64]| {
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && up.is_none_or(|(_, m)| v > m) {
                up = Some((t, v));
            }
            if in_low(alpha[t], y[t]) && low.is_none_or(|(_, m)| v < m) {
                low = Some((t, v));
            }
        }
        (up, low)
    };

    let mut trace = vec![0.0];
    let mut iterations = 0;
    let mut clean_passes = 0;
    let mut converged = false;
    let mut gap;

    loop {
        let (up, low) = select(&alpha, &grad);
        let (Some((i, m)), Some((j, big_m))) = (up, low) else {
            gap = 0.0;
            converged = true;
            break;
        };
        gap = m - big_m;
        if gap <= tol {
            // Nothing moves once the gap is closed, so later passes re-check the same state.
            clean_passes += 1;
            if clean_passes >= max_passes.max(1) {
                converged = true;
                break;
            }
            continue;
        }
        clean_passes = 0;
        if iterations >= max_iter {
            break;
        }

        let (yi, yj) = (y[i], y[j]);
        let (ai, aj) = (alpha[i], alpha[j]);
        let (ei, ej) = (yi * grad[i], yj * grad[j]);
        let eta = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(1e-12);
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        let snap = |a: f64| {
            if a < eps {
                0.0
            } else if a > c - eps {
                c
            } else {
                a
            }
        };
        let aj_new = snap((aj + yj * (ei - ej) / eta).clamp(lo, hi));
        let ai_new = snap(ai + yi * yj * (aj - aj_new));
        let (di, dj) = (ai_new - ai, aj_new - aj);
        if di == 0.0 && dj == 0.0 {
            // Pair cannot move; the problem is numerically stuck.
            break;
        }
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for t in 0..n {
            grad[t] += y[t] * (yi * k(t, i) * di + yj * k(t, j) * dj);
        }
        iterations += 1;
        if iterations % n == 0 {
            trace.push(objective(&alpha, &grad));
        }
    }
    trace.push(objective(&alpha, &grad));

    let free: Vec<f64> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).map(|t| -y[t] * grad[t]).collect();
    let bias = if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        match select(&alpha, &grad) {
            (Some((_, m)), Some((_, big_m))) => 0.5 * (m + big_m),
            (Some((_, m)), None) => m,
            (None, Some((_, big_m))) => big_m,
            (None, None) => 0.0,
        }
    };

    let keep: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel {
        support_vectors: keep.iter().map(|&t| rows[t].clone()).collect(),
        dual_coef: keep.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias,
        gamma,
        c,
        n_features: x.ncols(),
    };
    Ok(SvmFit { model, alphas: alpha, objective_trace: trace, iterations, converged, kkt_gap: gap })
}

impl SvmFit {
    /// Largest KKT violation over the training set, measured on the model's
    /// own decision values:
    /// `a=0 => y f >= 1`, `0<a<C => y f = 1`, `a=C => y f <= 1`.
    pub fn max_kkt_violation(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
        let c = self.model.c;
        let mut worst = 0.0f64;
        for ((row, &yt), &a) in x.rows().into_iter().zip(y).zip(&self.alphas) {
            let margin = yt * self.model.decision_value(&row.to_vec())?;
            let v = if a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if a >= c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

impl SvmModel {
    pub fn from_parts(support_vectors: Vec<Vec<f64>>, dual_coef: Vec<f64>, bias: f64, gamma: f64, c: f64, n_features: usize) -> Result<Self> {
        if support_vectors.len() != dual_coef.len() || support_vectors.iter().any(|s| s.len() != n_features) {
            return Err(ModelError::InvalidParameter("support vector shapes disagree".into()));
        }
        Ok(SvmModel { support_vectors, dual_coef, bias, gamma, c, n_features })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dual_coef(&self) -> &[f64] {
        &self.dual_coef
    }

    /// `f(x) = sum a_i y_i k(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(ModelError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &coef)| coef * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision_value(x)? >= 0.0))
    }
}
