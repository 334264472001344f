use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_matrix, ModelError, Result};

/// Per-feature standardization fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Population mean and standard deviation of every column.
pub fn fit_scaler(x: ArrayView2<'_, f64>) -> Result<Scaler> {
    check_matrix(x, x.nrows())?;
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut std = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            mean.push(first);
            std.push(0.0);
            continue;
        }
        let m = col.sum() / n;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(Scaler { mean, std })
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Zero-variance columns map to 0.
    pub fn transform_row(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.std) {
            *o = if s > 0.0 { (v - m) / s } else { 0.0 };
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), found: x.ncols() });
        }
        let mut out = Array2::zeros(x.dim());
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let row = row.to_vec();
            self.transform_row(&row, dst.as_slice_mut().expect("fresh array is contiguous"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    #[test]
    fn two_point_column() {
        let s = fit_scaler(array![[1.0], [3.0]].view()).unwrap();
        assert_eq!(s.mean(), &[2.0]);
        assert_eq!(s.std(), &[1.0]);
        assert_eq!(s.transform(array![[1.0], [3.0]].view()).unwrap(), array![[-1.0], [1.0]]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = array![[0.1, 1.0], [0.1, 2.0], [0.1, 3.0]];
        let t = fit_scaler(x.view()).unwrap().transform(x.view()).unwrap();
        assert!(t.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_columns_are_centred() {
        let x = array![[1.0, 10.0, -3.0], [2.5, 11.0, 7.0], [4.0, 13.0, 0.25], [9.0, 10.5, 1.0]];
        let t = fit_scaler(x.view()).unwrap().transform(x.view()).unwrap();
        for m in t.mean_axis(Axis(0)).unwrap() {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch() {
        let s = fit_scaler(array![[1.0, 2.0]].view()).unwrap();
        assert!(s.transform(array![[1.0]].view()).is_err());
    }
}
