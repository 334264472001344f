//! Fully connected ReLU network with a scalar linear (regression) head,
//! trained on squared error against the 0/1 label.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_matrix, ModelError, Result};
use crate::seed::{self, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    /// Hidden layer widths. `[32, 32]` is the default; `[32]` gives the
    /// single-hidden-layer reading of a "two-layer" network.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: vec![32, 32], lr: 0.01, epochs: 200, batch: 32 }
    }
}

/// One affine layer, weights stored row-major as `n_out x n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, input: &[f64], out: &mut [f64], relu: bool) {
        for (o, (row, &b)) in out.iter_mut().zip(self.weights.chunks_exact(self.n_in).zip(&self.bias)) {
            let z = row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + b;
            *o = if relu { z.max(0.0) } else { z };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl MlpModel {
    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn initialize(n_features: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if n_features == 0 || hidden.contains(&0) {
            return Err(ModelError::InvalidParameter("layer widths must be positive".into()));
        }
        let mut rng = seed::stream(seed, &[tags::MLP_INIT]);
        let widths: Vec<usize> = std::iter::once(n_features).chain(hidden.iter().copied()).chain([1]).collect();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(MlpModel { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let ok = !layers.is_empty()
            && layers.last().is_some_and(|l| l.n_out == 1)
            && layers.windows(2).all(|w| w[0].n_out == w[1].n_in)
            && layers.iter().all(|l| l.weights.len() == l.n_in * l.n_out && l.bias.len() == l.n_out);
        if !ok {
            return Err(ModelError::InvalidParameter("inconsistent layer shapes".into()));
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.n_out).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_parameters(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.n_params(), "parameter vector length");
        let mut it = theta.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Scalar regression output; the label is 1 when it reaches 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut acts = self.empty_activations();
        self.forward_into(x, &mut acts)
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict(x)? >= 0.5))
    }

    fn empty_activations(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.n_features()).chain(self.layers.iter().map(|l| l.n_out)).map(|w| vec![0.0; w]).collect()
    }

    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = acts.split_at_mut(l + 1);
            layer.forward(&before[l], &mut after[0], l != last);
        }
        acts[last + 1][0]
    }

    /// Adds the gradient of `scale * (f(x) - y)^2` into `grad` (flattened like
    /// [`parameters`](Self::parameters)) and returns the squared error.
    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        x: &[f64],
        y: f64,
        scale: f64,
        offsets: &[usize],
        acts: &mut [Vec<f64>],
        deltas: &mut [Vec<f64>],
        grad: &mut [f64],
    ) -> f64 {
        let out = self.forward_into(x, acts);
        let err = out - y;
        let last = self.layers.len() - 1;
        deltas[last][0] = 2.0 * err * scale;

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let off = offsets[l];
            {
                let delta = &deltas[l];
                let (gw, gb) = grad[off..off + layer.n_params()].split_at_mut(layer.weights.len());
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (g, &a) in gw[o * layer.n_in..(o + 1) * layer.n_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                    gb[o] += d;
                }
            }
            if l > 0 {
                let (lower, upper) = deltas.split_at_mut(l);
                let delta = &upper[0];
                let prev = &mut lower[l - 1];
                for (i, p) in prev.iter_mut().enumerate() {
                    // ReLU derivative: post-activation > 0 iff pre-activation > 0.
                    *p = if input[i] > 0.0 {
                        delta.iter().enumerate().map(|(o, &d)| d * layer.weights[o * layer.n_in + i]).sum()
                    } else {
                        0.0
                    };
                }
            }
        }
        err * err
    }

    fn param_offsets(&self) -> Vec<usize> {
        self.layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.n_params();
                Some(start)
            })
            .collect()
    }

    fn empty_deltas(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| vec![0.0; l.n_out]).collect()
    }

    /// Mean squared error over the given rows and its gradient with respect to
    /// every parameter (flattened like [`parameters`](Self::parameters)).
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_matrix(x, y.len())?;
        if x.ncols() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), found: x.ncols() });
        }
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let idx: Vec<usize> = (0..rows.len()).collect();
        Ok(self.batch_loss_gradient(&rows, y, &idx))
    }

    fn batch_loss_gradient(&self, rows: &[Vec<f64>], y: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let mut acts = self.empty_activations();
        let mut deltas = self.empty_deltas();
        let offsets = self.param_offsets();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            loss += self.accumulate(&rows[i], y[i], scale, &offsets, &mut acts, &mut deltas, &mut grad);
        }
        (loss * scale, grad)
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let mut it = grad.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * it.next().expect("gradient length matches parameters");
            }
        }
    }
}

/// Mini-batch SGD on mean squared error. The epoch shuffles come from the
/// substream `(seed, MLP_SHUFFLE)`, initialization from `(seed, MLP_INIT)`.
pub fn fit_mlp(x: ArrayView2<'_, f64>, y: &[f64], params: &MlpParams, seed: u64) -> Result<MlpModel> {
    check_matrix(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidParameter("targets must be finite".into()));
    }
    if !(params.lr > 0.0 && params.lr.is_finite()) || params.batch == 0 {
        return Err(ModelError::InvalidParameter(format!("lr {} / batch {} invalid", params.lr, params.batch)));
    }
    let mut model = MlpModel::initialize(x.ncols(), &params.hidden, seed)?;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = seed::stream(seed, &[tags::MLP_SHUFFLE]);

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch) {
            let (loss, grad) = model.batch_loss_gradient(&rows, y, batch);
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            model.step(&grad, params.lr);
        }
        if !model.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn zero_epochs_returns_initialization() {
        let x = array![[0.1, 0.2], [0.3, -0.4]];
        let params = MlpParams { epochs: 0, ..Default::default() };
        let fitted = fit_mlp(x.view(), &[0.0, 1.0], &params, 9).unwrap();
        assert_eq!(fitted, MlpModel::initialize(2, &[32, 32], 9).unwrap());
    }

    #[test]
    fn architecture_is_two_hidden_layers_of_32() {
        let m = MlpModel::initialize(5, &MlpParams::default().hidden, 0).unwrap();
        assert_eq!(m.hidden_widths(), vec![32, 32]);
        assert_eq!(m.n_params(), 5 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
        let limit = (6.0f64 / 37.0).sqrt();
        assert!(m.layers()[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn overfits_a_single_point() {
        let x = array![[0.5, -1.0, 2.0]];
        let params = MlpParams { epochs: 500, ..Default::default() };
        let m = fit_mlp(x.view(), &[1.0], &params, 3).unwrap();
        let (mse, _) = m.loss_and_gradient(x.view(), &[1.0]).unwrap();
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut m = MlpModel::initialize(3, &[32, 32], 0).unwrap();
        let mut theta = vec![0.0; m.n_params()];
        *theta.last_mut().unwrap() = 0.7;
        m.set_parameters(&theta);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.7);
        assert_eq!(m.predict_label(&[1.0, 2.0, 3.0]).unwrap(), 1);
    }

    #[test]
    fn dead_first_layer_leaves_bias_path() {
        // First layer maps x = (1, 1) to strictly negative preactivations.
        let l1 = Dense { n_in: 2, n_out: 2, weights: vec![-1.0, -1.0, -2.0, 0.5], bias: vec![0.0, 0.0] };
        let l2 = Dense { n_in: 2, n_out: 2, weights: vec![5.0, 5.0, 5.0, 5.0], bias: vec![0.3, -0.2] };
        let l3 = Dense { n_in: 2, n_out: 1, weights: vec![2.0, 4.0], bias: vec![0.1] };
        let m = MlpModel::from_layers(vec![l1, l2, l3]).unwrap();
        // w3 . relu(b2) + b3 = 2*0.3 + 4*0 + 0.1
        assert!((m.predict(&[1.0, 1.0]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::initialize(3, &[4], 0).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(ModelError::DimensionMismatch { expected: 3, found: 1 })));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        // A purely linear model on large inputs with a huge step blows up.
        let x = Array2::from_elem((4, 2), 50.0);
        let params = MlpParams { hidden: vec![], lr: 10.0, epochs: 50, ..Default::default() };
        assert!(matches!(fit_mlp(x.view(), &[0.0, 1.0, 0.0, 1.0], &params, 1), Err(ModelError::Diverged { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let x = array![[0.1, 0.2], [0.3, -0.4], [1.0, 0.0]];
        let params = MlpParams { epochs: 20, batch: 2, ..Default::default() };
        let a = fit_mlp(x.view(), &[0.0, 1.0, 1.0], &params, 4).unwrap();
        let b = fit_mlp(x.view(), &[0.0, 1.0, 1.0], &params, 4).unwrap();
        assert_eq!(a, b);
    }
}
