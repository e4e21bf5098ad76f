use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_distance, dtw_path};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DBA_MAX_ITER: usize = 30;
const DBA_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DbaResult<T: Scalar> {
    pub mean: Vec<T>,
    /// Weighted sum of DTW distances to the inputs: the initial value, then
    /// one entry per completed iteration.
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> DbaResult<T> {
    pub fn objective(&self) -> T {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// Linear-interpolation resample to `len` points (endpoints preserved).
pub fn resample<T: Scalar>(seq: &[T], len: usize) -> Vec<T> {
    let n = seq.len();
    if n == 0 || len == 0 {
        return Vec::new();
    }
    if len == 1 || n == 1 {
        return vec![seq[0]; len];
    }
    let step = T::from_usize_lossy(n - 1) / T::from_usize_lossy(len - 1);
    (0..len)
        .map(|i| {
            let pos = T::from_usize_lossy(i) * step;
            let lo = pos.floor().to_usize().unwrap_or(0).min(n - 1);
            let hi = (lo + 1).min(n - 1);
            let f = pos - T::from_usize_lossy(lo);
            seq[lo] + (seq[hi] - seq[lo]) * f
        })
        .collect()
}

/// DTW barycenter averaging with unit weights.
pub fn dba_mean<T: Scalar>(seqs: &[Vec<T>], target_len: usize, max_iter: usize) -> Result<DbaResult<T>> {
    dba_mean_weighted(seqs, &vec![T::one(); seqs.len()], target_len, max_iter)
}

/// Weighted DTW barycenter averaging. An integer weight `w` is equivalent to
/// repeating that sequence `w` times.
///
/// Starts from the weighted DTW medoid (lowest index on ties) resampled to
/// `target_len`. Each iteration aligns every input to the current mean and
/// sets each slot to the weighted median of the values aligned to it, which is
/// the exact minimizer under the absolute local cost, so the objective never
/// increases. Stops when the relative decrease falls to `1e-6` or below, or
/// after `max_iter` iterations. When every input is identical the resampled
/// input is returned unchanged.
pub fn dba_mean_weighted<T: Scalar>(
    seqs: &[Vec<T>],
    weights: &[T],
    target_len: usize,
    max_iter: usize,
) -> Result<DbaResult<T>> {
    if seqs.is_empty() {
        return Err(Error::InsufficientData("DBA needs at least one sequence".into()));
    }
    if weights.len() != seqs.len() {
        return Err(Error::Dimension {
            expected: seqs.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidArgument("DBA weights must be positive and finite".into()));
    }
    if target_len == 0 || seqs.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidArgument("DBA needs non-empty sequences and target length".into()));
    }

    let objective = |mean: &[T]| -> Result<T> {
        let d: Result<Vec<T>> = seqs.par_iter().map(|s| dtw_distance(mean, s, None)).collect();
        Ok(d?.into_iter().zip(weights).map(|(d, &w)| d * w).sum())
    };

    if seqs.iter().all(|s| s == &seqs[0]) {
        let mean = resample(&seqs[0], target_len);
        let obj = objective(&mean)?;
        return Ok(DbaResult {
            mean,
            objective_trace: vec![obj],
        });
    }

    let medoid = weighted_medoid(seqs, weights)?;
    let mut mean = resample(&seqs[medoid], target_len);
    let mut current = objective(&mean)?;
    let mut trace = vec![current];
    let tol = T::lit(DBA_REL_TOL);

    for _ in 0..max_iter {
        let mut slots: Vec<Vec<(T, T)>> = vec![Vec::new(); target_len];
        let paths: Result<Vec<_>> = seqs.par_iter().map(|s| dtw_path(&mean, s, None)).collect();
        for ((_, path), (s, &w)) in paths?.iter().zip(seqs.iter().zip(weights)) {
            for &(i, j) in path {
                slots[i].push((s[j], w));
            }
        }
        let candidate: Vec<T> = slots.iter_mut().map(|v| weighted_median(v)).collect();
        let next = objective(&candidate)?;
        if next > current {
            // only reachable through rounding; keep the better mean
            break;
        }
        let improvement = current - next;
        mean = candidate;
        trace.push(next);
        let done = next == T::zero() || improvement <= tol * current;
        current = next;
        if done {
            break;
        }
    }
    Ok(DbaResult {
        mean,
        objective_trace: trace,
    })
}

fn weighted_medoid<T: Scalar>(seqs: &[Vec<T>], weights: &[T]) -> Result<usize> {
    let n = seqs.len();
    let totals: Result<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = T::zero();
            for j in 0..n {
                if i != j {
                    acc = acc + weights[j] * dtw_distance(&seqs[i], &seqs[j], None)?;
                }
            }
            Ok(acc)
        })
        .collect();
    let totals = totals?;
    let mut best = 0;
    for i in 1..n {
        if totals[i] < totals[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Midpoint of the lower and upper weighted medians.
fn weighted_median<T: Scalar>(v: &mut [(T, T)]) -> T {
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let total: T = v.iter().map(|p| p.1).sum();
    let half = total / T::lit(2.0);
    let mut cum = T::zero();
    let mut lower = None;
    for &(x, w) in v.iter() {
        cum = cum + w;
        if lower.is_none() && cum >= half {
            lower = Some(x);
        }
        if cum > half {
            return (lower.unwrap_or(x) + x) / T::lit(2.0);
        }
    }
    lower.unwrap_or(v[v.len() - 1].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resample_endpoints_and_identity() {
        let s = vec![1.0, 4.0, 2.0];
        assert_eq!(resample(&s, 3), s);
        assert_eq!(resample(&s, 5), vec![1.0, 2.5, 4.0, 3.0, 2.0]);
    }

    #[test]
    fn weighted_median_cases() {
        assert_eq!(weighted_median(&mut [(3.0, 1.0), (1.0, 1.0), (2.0, 1.0)]), 2.0);
        assert_eq!(weighted_median(&mut [(1.0, 1.0), (3.0, 1.0)]), 2.0);
        assert_eq!(weighted_median(&mut [(1.0, 3.0), (3.0, 1.0)]), 1.0);
    }

    #[test]
    fn trivial_inputs() {
        let s = vec![22.0, 23.0, 25.0, 24.0];
        let one = dba_mean(&[s.clone()], 7, DBA_MAX_ITER).unwrap();
        assert_eq!(one.mean, resample(&s, 7));
        let copies = dba_mean(&vec![s.clone(); 5], 4, DBA_MAX_ITER).unwrap();
        assert_eq!(copies.mean, s);
        assert_eq!(copies.objective(), 0.0);
        assert!(dba_mean::<f64>(&[], 4, 30).is_err());
    }

    #[test]
    fn two_sequences_beat_trivial_candidates() {
        let a = vec![0.0, 1.0, 4.0, 4.0, 2.0, 0.0];
        let b = vec![0.0, 0.0, 1.0, 5.0, 1.0];
        let seqs = vec![a.clone(), b.clone()];
        let r = dba_mean(&seqs, 6, DBA_MAX_ITER).unwrap();
        let sum = |c: &[f64]| {
            dtw_distance(c, &a, None).unwrap() + dtw_distance(c, &b, None).unwrap()
        };
        assert!(r.objective() <= sum(&a) + 1e-12);
        assert!(r.objective() <= sum(&b) + 1e-12);
        assert!((r.objective() - sum(&r.mean)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn objective_never_increases(
            seqs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3..10), 3),
            len in 3usize..10,
        ) {
            let r = dba_mean(&seqs, len, DBA_MAX_ITER).unwrap();
            prop_assert_eq!(r.mean.len(), len);
            for w in r.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn integer_weights_equal_repetition(
            seqs in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 3..7), 2..4),
            reps in prop::collection::vec(1usize..4, 4),
        ) {
            let w: Vec<f64> = seqs.iter().zip(&reps).map(|(_, &r)| r as f64).collect();
            let repeated: Vec<Vec<f64>> = seqs
                .iter()
                .zip(&reps)
                .flat_map(|(s, &r)| std::iter::repeat_n(s.clone(), r))
                .collect();
            let a = dba_mean_weighted(&seqs, &w, 5, DBA_MAX_ITER).unwrap();
            let b = dba_mean(&repeated, 5, DBA_MAX_ITER).unwrap();
            prop_assert!((a.objective() - b.objective()).abs() < 1e-9);
        }
    }
}
