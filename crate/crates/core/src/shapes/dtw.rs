use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dynamic-time-warping distance with local cost `|a_i - b_j|` and steps
/// down, right and diagonal. `window` is a Sakoe-Chiba band half-width.
pub fn dtw_distance<T: Scalar>(a: &[T], b: &[T], window: Option<usize>) -> Result<T> {
    Ok(cost_matrix(a, b, window)?.final_cost())
}

/// DTW distance together with an optimal warping path from `(0, 0)` to
/// `(len(a) - 1, len(b) - 1)`.
pub fn dtw_path<T: Scalar>(
    a: &[T],
    b: &[T],
    window: Option<usize>,
) -> Result<(T, Vec<(usize, usize)>)> {
    let cm = cost_matrix(a, b, window)?;
    Ok((cm.final_cost(), cm.backtrack()))
}

struct CostMatrix<T> {
    n: usize,
    m: usize,
    acc: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    fn at(&self, i: usize, j: usize) -> T {
        self.acc[i * self.m + j]
    }

    fn final_cost(&self) -> T {
        self.at(self.n - 1, self.m - 1)
    }

    fn backtrack(&self) -> Vec<(usize, usize)> {
        let (mut i, mut j) = (self.n - 1, self.m - 1);
        let mut path = vec![(i, j)];
        while i > 0 || j > 0 {
            (i, j) = if i == 0 {
                (0, j - 1)
            } else if j == 0 {
                (i - 1, 0)
            } else {
                let (d, u, l) = (self.at(i - 1, j - 1), self.at(i - 1, j), self.at(i, j - 1));
                if d <= u && d <= l {
                    (i - 1, j - 1)
                } else if u <= l {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            };
            path.push((i, j));
        }
        path.reverse();
        path
    }
}

fn cost_matrix<T: Scalar>(a: &[T], b: &[T], window: Option<usize>) -> Result<CostMatrix<T>> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("DTW needs non-empty sequences".into()));
    }
    if let Some(w) = window {
        if w < n.abs_diff(m) {
            return Err(Error::InvalidArgument(format!(
                "window {w} is narrower than the length difference {}",
                n.abs_diff(m)
            )));
        }
    }
    let inf = T::infinity();
    let mut acc = vec![inf; n * m];
    for i in 0..n {
        let (lo, hi) = match window {
            Some(w) => (i.saturating_sub(w), (i + w).min(m - 1)),
            None => (0, m - 1),
        };
        for j in lo..=hi {
            let c = (a[i] - b[j]).abs();
            let prev = if i == 0 && j == 0 {
                T::zero()
            } else {
                let mut p = inf;
                if i > 0 {
                    p = p.min(acc[(i - 1) * m + j]);
                }
                if j > 0 {
                    p = p.min(acc[i * m + j - 1]);
                }
                if i > 0 && j > 0 {
                    p = p.min(acc[(i - 1) * m + j - 1]);
                }
                p
            };
            acc[i * m + j] = c + prev;
        }
    }
    Ok(CostMatrix { n, m, acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum cost over every monotone path, enumerated recursively.
    fn exhaustive(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let c = (a[i] - b[j]).abs();
            if i + 1 == a.len() && j + 1 == b.len() {
                return c;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            c + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn examples() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 3.0], None).unwrap(), 1.0);
        let a = [4.0, 1.0, 7.0, 7.0];
        assert_eq!(dtw_distance(&a, &a, None).unwrap(), 0.0);
        assert!(dtw_distance(&[1.0, 2.0, 3.0, 4.0], &[1.0], Some(2)).is_err());
        assert!(dtw_distance::<f64>(&[], &[1.0], None).is_err());
    }

    #[test]
    fn path_cost_matches_distance() {
        let a: [f64; 5] = [1.0, 5.0, 2.0, 2.0, 8.0];
        let b = [1.0, 2.0, 8.0];
        let (d, path) = dtw_path(&a, &b, None).unwrap();
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(4, 2)));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let sum: f64 = path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
        assert_eq!(sum, d);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_and_symmetric(
            a in prop::collection::vec(0.0f64..5.0, 1..=5),
            b in prop::collection::vec(0.0f64..5.0, 1..=5),
        ) {
            let d = dtw_distance(&a, &b, None).unwrap();
            prop_assert!((d - exhaustive(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(d, dtw_distance(&b, &a, None).unwrap());
        }

        #[test]
        fn never_worse_than_identity(
            pairs in prop::collection::vec((0.0f64..40.0, 0.0f64..40.0), 1..30)
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let identity: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!(dtw_distance(&a, &b, None).unwrap() <= identity + 1e-9);
            prop_assert!(dtw_distance(&a, &b, Some(0)).unwrap() == identity);
        }

        #[test]
        fn wider_window_never_costs_more(
            a in prop::collection::vec(0.0f64..10.0, 2..12),
            b in prop::collection::vec(0.0f64..10.0, 2..12),
            w in 0usize..6,
        ) {
            let w0 = a.len().abs_diff(b.len()) + w;
            let narrow = dtw_distance(&a, &b, Some(w0)).unwrap();
            let wide = dtw_distance(&a, &b, Some(w0 + 1)).unwrap();
            prop_assert!(wide <= narrow);
            prop_assert!(dtw_distance(&a, &b, None).unwrap() <= wide);
        }
    }
}
