use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExplainError, Result, ShapExplanation};
use crate::seed::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingOptions {
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { n_permutations: 64, seed: 0 }
    }
}

// Permutations are summed in fixed-size chunks so the floating-point order
// does not depend on the number of workers.
const CHUNK: usize = 16;

/// Permutation-sampling Shapley estimate of `f` at `x` against the marginal
/// distribution given by the `background` rows.
///
/// Permutation `k` draws its ordering and its background row from substream
/// `(seed, EXPLAIN, k)`. Walking a permutation swaps `x`'s values into the
/// background row one feature at a time, so its marginals telescope to
/// `f(x) - f(z_k)`. The base value is the mean of `f` over the whole
/// background; the difference between that and the mean over the drawn rows
/// (zero in expectation) is spread evenly over the features, which keeps the
/// estimate unbiased and makes local accuracy exact.
pub fn sampling_shap<F>(f: &F, x: &[f64], background: ArrayView2<'_, f64>, opts: &SamplingOptions) -> Result<ShapExplanation>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if background.nrows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    if opts.n_permutations == 0 {
        return Err(ExplainError::InvalidParameter("n_permutations must be at least 1".into()));
    }
    let p = x.len();
    if background.ncols() != p {
        return Err(ExplainError::DimensionMismatch { expected: background.ncols(), found: p });
    }
    let rows: Vec<Vec<f64>> = background.rows().into_iter().map(|r| r.to_vec()).collect();
    let chunks: Vec<Vec<f64>> = (0..opts.n_permutations.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; p];
            let mut order: Vec<usize> = (0..p).collect();
            for k in c * CHUNK..((c + 1) * CHUNK).min(opts.n_permutations) {
                let mut rng = seed::stream(opts.seed, &[tags::EXPLAIN, k as u64]);
                order.sort_unstable();
                order.shuffle(&mut rng);
                let mut z = rows[rng.random_range(0..rows.len())].clone();
                let mut prev = f(&z);
                for &j in &order {
                    z[j] = x[j];
                    let cur = f(&z);
                    acc[j] += cur - prev;
                    prev = cur;
                }
            }
            acc
        })
        .collect();

    let mut phi = vec![0.0; p];
    for chunk in &chunks {
        for (a, v) in phi.iter_mut().zip(chunk) {
            *a += v;
        }
    }
    let n = opts.n_permutations as f64;
    phi.iter_mut().for_each(|v| *v /= n);

    let base = rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
    let output = f(x);
    if p > 0 {
        let residual = (output - base - phi.iter().sum::<f64>()) / p as f64;
        phi.iter_mut().for_each(|v| *v += residual);
    }
    ShapExplanation::new(base, phi, output)
}
