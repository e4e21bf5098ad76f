//! Bottom-up hierarchical clustering with Lance-Williams distance updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Linkage::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownLinkage(s.to_string()))
    }
}

impl Serialize for Linkage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Linkage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Pairwise dissimilarities in upper-triangular storage. Ward works on squared
/// Euclidean distances, the other linkages on plain Euclidean distances.
struct Dissimilarity<T> {
    n: usize,
    d: Vec<T>,
}

impl<T: Scalar> Dissimilarity<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * self.n + b
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

/// Cut the dendrogram at `k` clusters. Merges pick the closest pair of active
/// clusters; ties go to the lexicographically smallest `(i, j)` pair of
/// representative indices. Labels are numbered by each cluster's smallest
/// member index.
pub fn agglomerative_fit<T: Scalar>(x: &Matrix<T>, k: usize, linkage: Linkage) -> Result<Vec<usize>> {
    let n = x.rows();
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in [1, {n}]")));
    }
    let mut dis = Dissimilarity {
        n,
        d: vec![T::zero(); n * n],
    };
    for i in 0..n {
        for j in i + 1..n {
            let d2 = sq_dist(x.row(i), x.row(j));
            dis.set(i, j, if linkage == Linkage::Ward { d2 } else { d2.sqrt() });
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut parent: Vec<usize> = (0..n).collect();

    // nearest active neighbour with a larger index, for each active row
    let mut nn: Vec<Option<(usize, T)>> = vec![None; n];
    let row_nn = |dis: &Dissimilarity<T>, active: &[bool], i: usize| -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for j in i + 1..n {
            if active[j] {
                let d = dis.get(i, j);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best
    };
    for i in 0..n {
        nn[i] = row_nn(&dis, &active, i);
    }

    let mut clusters = n;
    while clusters > k {
        let mut pick: Option<(usize, usize, T)> = None;
        for i in 0..n {
            if let (true, Some((j, d))) = (active[i], nn[i]) {
                if pick.is_none_or(|(_, _, pd)| d < pd) {
                    pick = Some((i, j, d));
                }
            }
        }
        let (a, b, dab) = pick.expect("at least two active clusters");
        let (na, nb) = (T::from_usize_lossy(size[a]), T::from_usize_lossy(size[b]));
        for m in 0..n {
            if !active[m] || m == a || m == b {
                continue;
            }
            let (dam, dbm) = (dis.get(a, m), dis.get(b, m));
            let nm = T::from_usize_lossy(size[m]);
            let v = match linkage {
                Linkage::Single => dam.min(dbm),
                Linkage::Complete => dam.max(dbm),
                Linkage::Average => (na * dam + nb * dbm) / (na + nb),
                Linkage::Ward => ((na + nm) * dam + (nb + nm) * dbm - nm * dab) / (na + nb + nm),
            };
            dis.set(a, m, v);
        }
        active[b] = false;
        parent[b] = a;
        size[a] += size[b];
        clusters -= 1;

        nn[b] = None;
        nn[a] = row_nn(&dis, &active, a);
        for i in 0..a {
            if !active[i] {
                continue;
            }
            match nn[i] {
                Some((j, _)) if j == a || j == b => nn[i] = row_nn(&dis, &active, i),
                Some((j, d)) => {
                    let dia = dis.get(i, a);
                    if dia < d || (dia == d && a < j) {
                        nn[i] = Some((a, dia));
                    }
                }
                None => nn[i] = row_nn(&dis, &active, i),
            }
        }
        for i in a + 1..n {
            if active[i] && matches!(nn[i], Some((j, _)) if j == b) {
                nn[i] = row_nn(&dis, &active, i);
            }
        }
    }

    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = root(i);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        labels.push(label_of_root[r]);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::metrics::adjusted_rand_index;

    #[test]
    fn far_pairs_any_linkage() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 0.0], [1.0, 0.0], [50.0, 50.0], [51.0, 50.0]]).unwrap();
        for l in Linkage::ALL {
            assert_eq!(agglomerative_fit(&x, 2, l).unwrap(), vec![0, 0, 1, 1], "{l}");
        }
    }

    /// Single linkage with k=2 splits a 1-D chain at its largest gap.
    #[test]
    fn chain_cut_at_largest_gap() {
        let pos = [0.0, 1.0, 2.5, 3.0, 7.0, 7.5, 9.0];
        let x = Matrix::from_rows(&pos.iter().map(|&p| [p]).collect::<Vec<_>>()).unwrap();
        let labels = agglomerative_fit(&x, 2, Linkage::Single).unwrap();
        let gap = pos
            .windows(2)
            .enumerate()
            .max_by(|a, b| (a.1[1] - a.1[0]).partial_cmp(&(b.1[1] - b.1[0])).unwrap())
            .unwrap()
            .0;
        let expected: Vec<usize> = (0..pos.len()).map(|i| usize::from(i > gap)).collect();
        assert_eq!(labels, expected);
    }

    #[test]
    fn unknown_linkage() {
        assert!(matches!("median".parse::<Linkage>(), Err(Error::UnknownLinkage(_))));
        assert_eq!("Ward".parse::<Linkage>().unwrap(), Linkage::Ward);
    }

    /// Naive O(n^3) reference: recompute cluster distances from raw points.
    fn brute(x: &Matrix<f64>, k: usize, linkage: Linkage) -> Vec<usize> {
        let n = x.rows();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let d = |i: usize, j: usize| sq_dist(x.row(i), x.row(j)).sqrt();
        let dist = |a: &[usize], b: &[usize]| -> f64 {
            let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)));
            match linkage {
                Linkage::Single => pairs.map(|(i, j)| d(i, j)).fold(f64::INFINITY, f64::min),
                Linkage::Complete => pairs.map(|(i, j)| d(i, j)).fold(0.0, f64::max),
                Linkage::Average => pairs.map(|(i, j)| d(i, j)).sum::<f64>() / (a.len() * b.len()) as f64,
                Linkage::Ward => {
                    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
                    let ss = |s: &[usize]| crate::cluster::metrics::inertia_of(&x.select_rows(s), &vec![0; s.len()], 1);
                    // Ward distance (squared form) = 2 * increase in SSE
                    2.0 * (ss(&ab) - ss(a) - ss(b))
                }
            }
        };
        while clusters.len() > k {
            let mut best = (0, 1, f64::INFINITY);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let v = dist(&clusters[i], &clusters[j]);
                    if v < best.2 - 1e-12 {
                        best = (i, j, v);
                    }
                }
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
        }
        let mut labels = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for &m in members {
                labels[m] = c;
            }
        }
        labels
    }

    #[test]
    fn matches_naive_reference() {
        let mut s: u64 = 7;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let rows: Vec<[f64; 2]> = (0..14).map(|_| [next() * 10.0, next() * 10.0]).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            for l in Linkage::ALL {
                for k in [2, 3, 5] {
                    let fast = agglomerative_fit(&x, k, l).unwrap();
                    let slow = brute(&x, k, l);
                    assert_eq!(adjusted_rand_index(&fast, &slow), 1.0, "{l} k={k}");
                }
            }
        }
    }
}
