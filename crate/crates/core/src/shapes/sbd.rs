use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Z-normalize with the population standard deviation. Constant (or
/// length-1) input maps to zeros.
pub fn znormalize<T: Scalar>(seq: &[T]) -> Vec<T> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = T::from_usize_lossy(n);
    let mean = seq.iter().copied().sum::<T>() / nf;
    let var = seq.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / nf;
    let sd = var.sqrt();
    if !(sd > T::epsilon() * mean.abs().max(T::one())) {
        return vec![T::zero(); n];
    }
    seq.iter().map(|&x| (x - mean) / sd).collect()
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// `Σ_t a[t] · b[(t + s) mod L]`
fn circular_cc<T: Scalar>(a: &[T], b: &[T], s: usize) -> T {
    let l = a.len();
    let mut acc = T::zero();
    for t in 0..l {
        acc = acc + a[t] * b[(t + s) % l];
    }
    acc
}

/// Circular shifts considered when `max_shift` bounds the lag to `±max_shift`.
fn shifts(l: usize, max_shift: Option<usize>) -> Vec<usize> {
    match max_shift {
        None => (0..l).collect(),
        Some(m) => {
            let m = m.min(l / 2);
            let mut v = vec![0];
            for s in 1..=m {
                v.push(s);
                if l - s != s {
                    v.push(l - s);
                }
            }
            v
        }
    }
}

/// Best normalized circular cross-correlation between two already
/// z-normalized sequences, with the shift that attains it (first maximum).
fn best_ncc<T: Scalar>(za: &[T], zb: &[T], max_shift: Option<usize>) -> (T, usize) {
    let denom = norm(za) * norm(zb);
    if denom == T::zero() {
        return (T::zero(), 0);
    }
    let mut best = (T::neg_infinity(), 0);
    for s in shifts(za.len(), max_shift) {
        let c = circular_cc(za, zb, s) / denom;
        if c > best.0 {
            best = (c, s);
        }
    }
    best
}

/// Shape-based distance over all circular shifts: 1 minus the maximum
/// normalized cross-correlation of the z-normalized inputs. Because the
/// correlations over a full cycle of shifts sum to zero, the result lies in
/// `[0, 1]` for this variant.
pub fn sbd_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    sbd_distance_with(a, b, None)
}

/// SBD restricted to lags `|s| <= max_shift` (`None` = all circular shifts).
/// `Some(0)` compares the sequences without shifting, so `a` vs `-a` is 2.
pub fn sbd_distance_with<T: Scalar>(a: &[T], b: &[T], max_shift: Option<usize>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("SBD needs sequences of length >= 2".into()));
    }
    let (za, zb) = (znormalize(a), znormalize(b));
    let (na, nb) = (norm(&za), norm(&zb));
    if na == T::zero() || nb == T::zero() {
        // a constant sequence has no shape; two of them share one
        let same = na == nb;
        return Ok(if same { T::zero() } else { T::one() });
    }
    let (c, _) = best_ncc(&za, &zb, max_shift);
    let two = T::lit(2.0);
    Ok((T::one() - c).max(T::zero()).min(two))
}

/// Rotate `x` so that element `s` comes first.
pub fn circular_shift<T: Scalar>(x: &[T], s: usize) -> Vec<T> {
    let l = x.len();
    (0..l).map(|t| x[(t + s) % l]).collect()
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;
const ALIGN_MAX_ROUNDS: usize = 20;

/// Single-cluster k-shape centroid of equal-length sequences.
///
/// Members are aligned to the current centroid by their best circular shift,
/// then the centroid is the dominant eigenvector of `Q S Q` (`S` the sum of
/// outer products of the aligned members, `Q` the centering matrix), found by
/// power iteration. Alignment repeats until the chosen shifts stop changing.
/// The result is z-normalized and signed so its mean correlation with the
/// members is non-negative.
pub fn kshape_unify<T: Scalar>(seqs: &[Vec<T>]) -> Result<Vec<T>> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::InsufficientData("k-shape needs at least one sequence".into()))?;
    let l = first.len();
    if l < 2 {
        return Err(Error::InvalidArgument("k-shape needs sequences of length >= 2".into()));
    }
    if let Some(bad) = seqs.iter().find(|s| s.len() != l) {
        return Err(Error::Dimension {
            expected: l,
            got: bad.len(),
        });
    }
    let z: Vec<Vec<T>> = seqs.iter().map(|s| znormalize(s)).collect();
    if z.len() == 1 {
        return Ok(z[0].clone());
    }
    let Some(start) = z.iter().find(|s| norm(s) > T::zero()) else {
        return Ok(vec![T::zero(); l]);
    };

    let mut centroid = start.clone();
    let mut prev_shifts: Option<Vec<usize>> = None;
    for _ in 0..ALIGN_MAX_ROUNDS {
        let shifts: Vec<usize> = z.iter().map(|s| best_ncc(&centroid, s, None).1).collect();
        if prev_shifts.as_ref() == Some(&shifts) {
            break;
        }
        let aligned: Vec<Vec<T>> = z.iter().zip(&shifts).map(|(s, &k)| circular_shift(s, k)).collect();
        centroid = shape_extraction(&aligned);
        prev_shifts = Some(shifts);
    }
    Ok(centroid)
}

fn shape_extraction<T: Scalar>(aligned: &[Vec<T>]) -> Vec<T> {
    let l = aligned[0].len();
    let lf = T::from_usize_lossy(l);
    // M = Q S Q; members are already centered, so Q S Q = S up to rounding,
    // but keep the projection explicit for robustness.
    let mut s = vec![T::zero(); l * l];
    for x in aligned {
        for i in 0..l {
            for j in 0..l {
                s[i * l + j] = s[i * l + j] + x[i] * x[j];
            }
        }
    }
    let center = |v: &mut [T]| {
        let m = v.iter().copied().sum::<T>() / lf;
        v.iter_mut().for_each(|x| *x = *x - m);
    };
    // Q S Q applied to v is center(S · center(v)).
    let apply = |v: &[T]| -> Vec<T> {
        let mut c = v.to_vec();
        center(&mut c);
        let mut out: Vec<T> = (0..l)
            .map(|i| (0..l).map(|j| s[i * l + j] * c[j]).sum::<T>())
            .collect();
        center(&mut out);
        out
    };

    let mut v: Vec<T> = (0..l)
        .map(|i| aligned.iter().map(|x| x[i]).sum::<T>())
        .collect();
    center(&mut v);
    if norm(&v) <= T::epsilon() {
        v = aligned.iter().find(|x| norm(x) > T::zero()).cloned().unwrap_or_else(|| vec![T::zero(); l]);
    }
    let n0 = norm(&v);
    if n0 == T::zero() {
        return v;
    }
    v.iter_mut().for_each(|x| *x = *x / n0);

    let tol = T::lit(POWER_TOL);
    for _ in 0..POWER_MAX_ITER {
        let mut w = apply(&v);
        let nw = norm(&w);
        if nw == T::zero() {
            return vec![T::zero(); l];
        }
        w.iter_mut().for_each(|x| *x = *x / nw);
        let diff = norm(&w.iter().zip(&v).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        v = w;
        if diff < tol {
            break;
        }
    }

    let corr: T = aligned.iter().map(|x| x.iter().zip(&v).map(|(&a, &b)| a * b).sum::<T>()).sum();
    let flip = if corr != T::zero() {
        corr < T::zero()
    } else {
        let big = v
            .iter()
            .copied()
            .fold(T::zero(), |m, x| if x.abs() > m.abs() { x } else { m });
        big < T::zero()
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    znormalize(&v)
}
