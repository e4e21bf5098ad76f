//! Internal cluster-validity indices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

fn cluster_sizes(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Mean silhouette over all points using Euclidean distance. Points in a
/// singleton cluster contribute 0, as do points with `a = b = 0`.
pub fn silhouette<T: Scalar>(x: &Matrix<T>, labels: &[usize]) -> Result<T> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    let sizes = cluster_sizes(labels);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }
    let k = sizes.len();
    let n = x.rows();
    let total: T = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return T::zero();
            }
            let mut sums = vec![T::zero(); k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] = sums[labels[j]] + sq_dist(x.row(i), x.row(j)).sqrt();
                }
            }
            let a = sums[own] / T::from_usize_lossy(sizes[own] - 1);
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / T::from_usize_lossy(sizes[c]))
                .fold(T::infinity(), T::min);
            let m = a.max(b);
            if m == T::zero() {
                T::zero()
            } else {
                (b - a) / m
            }
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    Ok(total / T::from_usize_lossy(n))
}

/// Between-cluster dispersion over within-cluster dispersion, each divided by
/// its degrees of freedom. Returns `+inf` when the within term is zero and the
/// between term is positive, and 0 when both are zero.
pub fn calinski_harabasz<T: Scalar>(x: &Matrix<T>, labels: &[usize]) -> Result<T> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
        });
    }
    let sizes = cluster_sizes(labels);
    let k = sizes.iter().filter(|&&s| s > 0).count();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "Calinski-Harabasz needs at least two clusters".into(),
        ));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "Calinski-Harabasz undefined for k = n = {n}"
        )));
    }
    let centroids = super::metrics::centroids_of(x, labels, sizes.len());
    let grand: Vec<T> = (0..x.cols())
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<T>() / T::from_usize_lossy(n))
        .collect();
    let between: T = sizes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0)
        .map(|(c, &s)| T::from_usize_lossy(s) * sq_dist(centroids.row(c), &grand))
        .sum();
    let within: T = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x.row(i), centroids.row(l)))
        .sum();
    if within == T::zero() {
        return Ok(if between > T::zero() {
            T::infinity()
        } else {
            T::zero()
        });
    }
    let kf = T::from_usize_lossy(k);
    let nf = T::from_usize_lossy(n);
    Ok((between / (kf - T::one())) / (within / (nf - kf)))
}
