use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PcaProjection<T: Scalar> {
    /// n x 2 scores.
    #[serde(skip)]
    pub coords: Vec<[T; 2]>,
    pub components: [Vec<T>; 2],
    pub column_means: Vec<T>,
    pub explained_variance_ratio: [T; 2],
}

/// Project onto the top two principal components. Each component is signed so
/// that its largest-magnitude loading is positive.
pub fn pca_project<T: Scalar>(x: &Matrix<T>) -> Result<PcaProjection<T>> {
    let (n, d) = (x.rows(), x.cols());
    if n < 3 {
        return Err(Error::InsufficientData(format!("PCA needs at least 3 rows, got {n}")));
    }
    if d < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 columns".into()));
    }
    let nf = T::from_usize_lossy(n);
    let means: Vec<T> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<T>() / nf)
        .collect();
    let mut cov = Matrix::<T>::zeros(d, d);
    for i in 0..n {
        let r = x.row(i);
        for a in 0..d {
            for b in a..d {
                let v = cov.get(a, b) + (r[a] - means[a]) * (r[b] - means[b]);
                cov.set(a, b, v);
            }
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    for a in 0..d {
        for b in a..d {
            let v = cov.get(a, b) / denom;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    let (vals, vecs) = symmetric_eigen(&cov);
    let total: T = vals.iter().map(|&v| v.max(T::zero())).sum();
    let component = |c: usize| -> Vec<T> {
        let mut v: Vec<T> = (0..d).map(|k| vecs.get(k, c)).collect();
        let lead = v
            .iter()
            .copied()
            .enumerate()
            .fold((0, T::zero()), |best, (i, x)| if x.abs() > best.1.abs() { (i, x) } else { best });
        if lead.1 < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let coords = (0..n)
        .map(|i| {
            let r = x.row(i);
            let score = |c: &[T]| (0..d).map(|k| (r[k] - means[k]) * c[k]).sum::<T>();
            [score(&components[0]), score(&components[1])]
        })
        .collect();
    let ratio = |v: T| if total > T::zero() { v.max(T::zero()) / total } else { T::zero() };
    Ok(PcaProjection {
        coords,
        components,
        column_means: means,
        explained_variance_ratio: [ratio(vals[0]), ratio(vals[1])],
    })
}
