use std::collections::BTreeMap;

use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

/// Cluster means for the given labels (`k` rows; empty clusters stay zero).
pub fn centroids_of<T: Scalar>(x: &Matrix<T>, labels: &[usize], k: usize) -> Matrix<T> {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
            *s = *s + v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let n = T::from_usize_lossy(count);
            for s in sums.row_mut(c) {
                *s = *s / n;
            }
        }
    }
    sums
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn inertia_of<T: Scalar>(x: &Matrix<T>, labels: &[usize], k: usize) -> T {
    let c = centroids_of(x, labels, k);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x.row(i), c.row(l)))
        .sum()
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as u64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ra: BTreeMap<usize, u64> = BTreeMap::new();
    let mut rb: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.values().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sa * sb / total;
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
