use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, KMeansConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::substream_index;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ElbowPoint<T: Scalar> {
    pub k: usize,
    pub inertia: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ElbowResult<T: Scalar> {
    pub k: usize,
    /// Chord distance of the knee with both axes rescaled to [0, 1].
    pub knee_strength: f64,
    pub curve: Vec<ElbowPoint<T>>,
}

/// Knees weaker than this are treated as "no elbow" and resolve to `k_min`.
/// An ideal L-shaped curve scores about 0.6, a straight line 0.
pub const MIN_KNEE_STRENGTH: f64 = 0.3;

/// Seed used for the k-means fit at a given `k` inside an elbow scan.
pub fn elbow_seed(seed: u64, k: usize) -> u64 {
    substream_index(seed, k as u64)
}

/// Index of the curve point farthest (perpendicularly) from the chord joining
/// the first and last points, and that distance measured after rescaling both
/// axes to [0, 1]. Ties resolve to the smallest index. The argmax itself does
/// not depend on axis scaling.
pub fn chord_knee(points: &[(f64, f64)]) -> (usize, f64) {
    if points.len() < 3 {
        return (0, 0.0);
    }
    let (x0, y0) = points[0];
    let (x1, y1) = points[points.len() - 1];
    let (sx, sy) = (x1 - x0, y1 - y0);
    if sx == 0.0 || sy == 0.0 {
        return (0, 0.0);
    }
    let mut best = (0, 0.0);
    for (i, &(x, y)) in points.iter().enumerate() {
        let (u, v) = ((x - x0) / sx, (y - y0) / sy);
        // chord is v = u in rescaled coordinates
        let d = (u - v).abs() / std::f64::consts::SQRT_2;
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Fit k-means for every k in `k_min..=k_max` and pick the knee of the
/// inertia curve (see [`MIN_KNEE_STRENGTH`]).
pub fn elbow_select<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ElbowResult<T>> {
    elbow_select_with(x, k_min, k_max, seed, MIN_KNEE_STRENGTH)
}

pub fn elbow_select_with<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    seed: u64,
    min_strength: f64,
) -> Result<ElbowResult<T>> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidArgument(format!(
            "elbow range [{k_min}, {k_max}] must satisfy 2 <= k_min <= k_max"
        )));
    }
    if k_max > x.rows() {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} exceeds n = {}",
            x.rows()
        )));
    }
    let curve = (k_min..=k_max)
        .map(|k| {
            let fit = kmeans_fit(x, &KMeansConfig::new(k, elbow_seed(seed, k)))?;
            Ok(ElbowPoint {
                k,
                inertia: fit.inertia,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .map(|p| (p.k as f64, p.inertia.to_f64_lossy()))
        .collect();
    let (idx, knee_strength) = chord_knee(&pts);
    let k = if knee_strength >= min_strength {
        curve[idx].k
    } else {
        k_min
    };
    Ok(ElbowResult {
        k,
        knee_strength,
        curve,
    })
}
