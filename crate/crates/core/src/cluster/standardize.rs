use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, N_FEATURES};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Per-column (mean, sd) used to z-score a matrix. Constant columns store sd 1
/// and map to zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scaler<T: Scalar> {
    pub mean: Vec<T>,
    pub sd: Vec<T>,
    #[serde(default)]
    pub constant: Vec<bool>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(x: &Matrix<T>) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "standardization needs at least 2 rows, got {n}"
            )));
        }
        let nf = T::from_usize_lossy(n);
        let mut mean = vec![T::zero(); x.cols()];
        let mut sd = vec![T::zero(); x.cols()];
        let mut constant = vec![false; x.cols()];
        for j in 0..x.cols() {
            let m = (0..n).map(|i| x.get(i, j)).sum::<T>() / nf;
            let var = (0..n).map(|i| (x.get(i, j) - m).powi(2)).sum::<T>() / nf;
            let s = var.sqrt();
            // relative test so that rounding noise in a constant column counts as constant
            let is_constant = s <= T::epsilon() * T::lit(16.0) * m.abs().max(T::one());
            mean[j] = m;
            sd[j] = if is_constant { T::one() } else { s };
            constant[j] = is_constant;
        }
        Ok(Scaler { mean, sd, constant })
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                got: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.constant.get(j).copied().unwrap_or(false) {
                    T::zero()
                } else {
                    (*v - self.mean[j]) / self.sd[j]
                };
            }
        }
        Ok(out)
    }

    pub fn inverse_row(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| v * self.sd[j] + self.mean[j])
            .collect()
    }

    pub fn inverse_transform(&self, z: &Matrix<T>) -> Matrix<T> {
        let rows: Vec<Vec<T>> = z.iter_rows().map(|r| self.inverse_row(r)).collect();
        Matrix::from_rows(&rows).expect("consistent widths")
    }
}

/// Z-scored feature matrix plus the scaler that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix<T: Scalar> {
    pub data: Matrix<T>,
    pub scaler: Scaler<T>,
}

pub fn feature_matrix<T: Scalar>(vectors: &[FeatureVector<T>]) -> Matrix<T> {
    let rows: Vec<[T; N_FEATURES]> = vectors.iter().map(|v| v.to_array()).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, N_FEATURES);
    }
    Matrix::from_rows(&rows).expect("fixed width")
}

/// Ordinal-encode the categories and z-score all nine columns.
pub fn standardize<T: Scalar>(vectors: &[FeatureVector<T>]) -> Result<StandardizedMatrix<T>> {
    standardize_matrix(&feature_matrix(vectors))
}

pub fn standardize_matrix<T: Scalar>(x: &Matrix<T>) -> Result<StandardizedMatrix<T>> {
    let scaler = Scaler::fit(x)?;
    let data = scaler.transform(x)?;
    Ok(StandardizedMatrix { data, scaler })
}
