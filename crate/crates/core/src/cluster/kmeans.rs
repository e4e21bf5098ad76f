//! Lloyd's k-means with k-means++ seeding and best-of-n restarts.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from, substream_index, Rng};
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    /// Stop once the relative inertia improvement of an iteration drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

/// Result of a single restart or the best of several.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T: Scalar> {
    pub centroids: Matrix<T>,
    pub assignments: Vec<usize>,
    pub inertia: T,
    pub n_iter: usize,
    /// Inertia after each assignment step.
    pub trace: Vec<T>,
}

fn nearest<T: Scalar>(x: &[T], centroids: &Matrix<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++: first centre uniform, each next centre with probability
/// proportional to squared distance to the closest chosen centre.
pub fn kmeans_plus_plus<T: Scalar>(x: &Matrix<T>, k: usize, rng: &mut Rng) -> Matrix<T> {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(first)).to_f64_lossy())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // guard against landing on a zero-weight tail through rounding
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)).to_f64_lossy());
        }
    }
    centroids
}

fn assign<T: Scalar>(x: &Matrix<T>, centroids: &Matrix<T>, labels: &mut [usize], dist: &mut [T]) -> T {
    let mut inertia = T::zero();
    for i in 0..x.rows() {
        let (c, d) = nearest(x.row(i), centroids);
        labels[i] = c;
        dist[i] = d;
        inertia = inertia + d;
    }
    inertia
}

/// Give every empty cluster the point currently farthest from its centroid.
/// Returns true when anything was moved.
fn repair_empty<T: Scalar>(
    x: &Matrix<T>,
    centroids: &mut Matrix<T>,
    labels: &mut [usize],
    dist: &mut [T],
) -> bool {
    let k = centroids.rows();
    let mut moved = false;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return moved;
        };
        // farthest point among clusters that can spare one
        let mut far: Option<usize> = None;
        for i in 0..x.rows() {
            if counts[labels[i]] > 1 && far.is_none_or(|f| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        let Some(i) = far else {
            return moved;
        };
        centroids.row_mut(empty).copy_from_slice(x.row(i));
        labels[i] = empty;
        dist[i] = T::zero();
        moved = true;
    }
}

fn update_means<T: Scalar>(x: &Matrix<T>, labels: &[usize], centroids: &mut Matrix<T>) {
    let k = centroids.rows();
    let mut sums = Matrix::<T>::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
            *s = *s + v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let n = T::from_usize_lossy(counts[c]);
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / n;
            }
        }
    }
}

/// One Lloyd run from the given initial centroids. On return every point is
/// assigned to its nearest stored centroid and `inertia` is measured against
/// those centroids.
pub fn lloyd<T: Scalar>(x: &Matrix<T>, init: Matrix<T>, max_iter: usize, tol: f64) -> KMeansFit<T> {
    let n = x.rows();
    let mut centroids = init;
    let mut labels = vec![0usize; n];
    let mut dist = vec![T::zero(); n];
    let mut trace = Vec::new();
    let mut inertia = assign(x, &centroids, &mut labels, &mut dist);
    if repair_empty(x, &mut centroids, &mut labels, &mut dist) {
        inertia = dist.iter().copied().sum();
    }
    trace.push(inertia);
    let mut n_iter = 0;
    while n_iter < max_iter {
        n_iter += 1;
        update_means(x, &labels, &mut centroids);
        let prev_labels = labels.clone();
        let prev = inertia;
        inertia = assign(x, &centroids, &mut labels, &mut dist);
        if repair_empty(x, &mut centroids, &mut labels, &mut dist) {
            inertia = dist.iter().copied().sum();
        }
        trace.push(inertia);
        if labels == prev_labels {
            break;
        }
        let prev = prev.to_f64_lossy();
        if prev <= 0.0 || (prev - inertia.to_f64_lossy()) / prev < tol {
            break;
        }
    }
    KMeansFit {
        centroids,
        assignments: labels,
        inertia,
        n_iter,
        trace,
    }
}

/// Best-of-`n_init` k-means. Restart `r` seeds its own stream from
/// `(seed, r)`, so the result does not depend on scheduling.
pub fn kmeans_fit<T: Scalar>(x: &Matrix<T>, cfg: &KMeansConfig) -> Result<KMeansFit<T>> {
    let n = x.rows();
    if cfg.k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {}", cfg.k)));
    }
    if cfg.k > n {
        return Err(Error::InvalidArgument(format!("k = {} exceeds n = {n}", cfg.k)));
    }
    let restarts = cfg.n_init.max(1);
    let fits: Vec<KMeansFit<T>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from(substream_index(cfg.seed, r as u64));
            let init = kmeans_plus_plus(x, cfg.k, &mut rng);
            lloyd(x, init, cfg.max_iter, cfg.tol)
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .unwrap();
    Ok(best)
}
