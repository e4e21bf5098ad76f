use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, f_sf};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cluster-by-category count table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if let Some(bad) = counts.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(ContingencyTable { counts })
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }

    pub fn n_cols(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.n_cols()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Copy without rows or columns whose total is zero.
    pub fn without_empty(&self) -> ContingencyTable {
        let rt = self.row_totals();
        let ct = self.col_totals();
        let counts = self
            .counts
            .iter()
            .zip(&rt)
            .filter(|(_, &t)| t > 0)
            .map(|(r, _)| r.iter().zip(&ct).filter(|(_, &t)| t > 0).map(|(&c, _)| c).collect())
            .collect();
        ContingencyTable { counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TestResult<T: Scalar> {
    pub statistic: T,
    /// One entry for chi-squared, `(between, within)` for ANOVA.
    pub dof: Vec<usize>,
    pub p_value: T,
    pub significant_05: bool,
    pub significant_01: bool,
    /// Set when empty rows or columns were dropped before testing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl<T: Scalar> TestResult<T> {
    fn new(statistic: T, dof: Vec<usize>, p_value: T, warning: Option<String>) -> Self {
        let p = p_value.max(T::zero()).min(T::one());
        TestResult {
            statistic,
            dof,
            p_value: p,
            significant_05: p < T::lit(0.05),
            significant_01: p < T::lit(0.01),
            warning,
        }
    }

    /// `"**"` below 0.01, `"*"` below 0.05, empty otherwise.
    pub fn stars(&self) -> &'static str {
        if self.significant_01 {
            "**"
        } else if self.significant_05 {
            "*"
        } else {
            ""
        }
    }
}

/// Pearson chi-squared test of independence. Rows or columns with a zero
/// total are dropped (reported in `warning`). `yates` applies the continuity
/// correction, and only to 2x2 tables.
pub fn chi_square_test<T: Scalar>(table: &ContingencyTable, yates: bool) -> Result<TestResult<T>> {
    let t = table.without_empty();
    let warning = (t.n_rows() != table.n_rows() || t.n_cols() != table.n_cols()).then(|| {
        format!(
            "dropped {} empty row(s) and {} empty column(s)",
            table.n_rows() - t.n_rows(),
            table.n_cols() - t.n_cols()
        )
    });
    let (r, c) = (t.n_rows(), t.n_cols());
    if r < 2 || c < 2 {
        return Err(Error::InsufficientData(format!(
            "contingency table needs 2 non-empty rows and columns, has {r}x{c}"
        )));
    }
    let rt = t.row_totals();
    let ct = t.col_totals();
    let n: u64 = rt.iter().sum();
    let nf = T::from_u64(n).expect("count fits");
    let correct = yates && r == 2 && c == 2;
    let mut stat = T::zero();
    for i in 0..r {
        for j in 0..c {
            let e = T::from_u64(rt[i]).unwrap() * T::from_u64(ct[j]).unwrap() / nf;
            let mut dev = (T::from_u64(t.counts[i][j]).unwrap() - e).abs();
            if correct {
                dev = (dev - T::lit(0.5)).max(T::zero());
            }
            stat = stat + dev * dev / e;
        }
    }
    let dof = (r - 1) * (c - 1);
    let p = chi_square_sf(stat, T::from_usize_lossy(dof))?;
    Ok(TestResult::new(stat, vec![dof], p, warning))
}

/// One-way ANOVA F test.
pub fn anova_f_test<T: Scalar>(groups: &[Vec<T>]) -> Result<TestResult<T>> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!("ANOVA needs at least 2 groups, got {k}")));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs at least 2 samples per group, got {}",
            g.len()
        )));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= k {
        return Err(Error::InsufficientData("ANOVA needs more samples than groups".into()));
    }
    let grand = groups.iter().flatten().copied().sum::<T>() / T::from_usize_lossy(n);
    let mut ssb = T::zero();
    let mut ssw = T::zero();
    for g in groups {
        let m = g.iter().copied().sum::<T>() / T::from_usize_lossy(g.len());
        ssb = ssb + T::from_usize_lossy(g.len()) * (m - grand) * (m - grand);
        ssw = ssw + g.iter().map(|&x| (x - m) * (x - m)).sum::<T>();
    }
    let (d1, d2) = (k - 1, n - k);
    let (f, p) = if ssw == T::zero() {
        if ssb == T::zero() {
            (T::zero(), T::one())
        } else {
            (T::infinity(), T::zero())
        }
    } else {
        let f = (ssb / T::from_usize_lossy(d1)) / (ssw / T::from_usize_lossy(d2));
        (f, f_sf(f, T::from_usize_lossy(d1), T::from_usize_lossy(d2))?)
    };
    Ok(TestResult::new(f, vec![d1, d2], p, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[&[u64]]) -> ContingencyTable {
        ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn chi_square_examples() {
        let r: TestResult<f64> = chi_square_test(&table(&[&[10, 10], &[10, 10]]), false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.stars(), "");

        let r: TestResult<f64> = chi_square_test(&table(&[&[20, 0], &[0, 20]]), false).unwrap();
        assert!((r.statistic - 40.0).abs() < 1e-12);
        assert_eq!(r.dof, vec![1]);
        assert!(r.p_value < 1e-9);
        assert_eq!(r.stars(), "**");

        let y: TestResult<f64> = chi_square_test(&table(&[&[20, 0], &[0, 20]]), true).unwrap();
        // (|20 - 10| - 0.5)^2 / 10 * 4
        assert!((y.statistic - 36.1).abs() < 1e-12);
    }

    #[test]
    fn chi_square_drops_empty_margins() {
        let r: TestResult<f64> = chi_square_test(&table(&[&[5, 0, 7], &[0, 0, 0], &[9, 0, 2]]), false).unwrap();
        assert_eq!(r.dof, vec![1]);
        assert!(r.warning.is_some());
        assert!(chi_square_test::<f64>(&table(&[&[5, 0], &[3, 0]]), false).is_err());
        assert!(ContingencyTable::new(vec![vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn anova_examples() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let r = anova_f_test(&g).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));

        let far = vec![
            (0..10).map(|i| 1e-3 * i as f64).collect::<Vec<_>>(),
            (0..10).map(|i| 100.0 + 1e-3 * i as f64).collect(),
        ];
        assert!(anova_f_test(&far).unwrap().p_value < 1e-9);

        let flat = vec![vec![2.0, 2.0], vec![2.0, 2.0, 2.0]];
        assert_eq!(anova_f_test(&flat).unwrap().p_value, 1.0);
        let split = vec![vec![2.0, 2.0], vec![3.0, 3.0]];
        assert_eq!(anova_f_test(&split).unwrap().p_value, 0.0);

        assert!(anova_f_test(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(anova_f_test(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn anova_two_groups_is_t_squared() {
        // pooled two-sample t statistic squared equals F
        let a = [4.1, 5.3, 6.0, 4.8, 5.5];
        let b = [6.2, 7.1, 5.9, 6.8];
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let ss = |x: &[f64]| {
            let m = mean(x);
            x.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let sp2 = (ss(&a) + ss(&b)) / 7.0;
        let t = (mean(&a) - mean(&b)) / (sp2 * (1.0 / 5.0 + 1.0 / 4.0)).sqrt();
        let r = anova_f_test(&[a.to_vec(), b.to_vec()]).unwrap();
        assert!((r.statistic - t * t).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn chi_square_permutation_invariant(
            counts in prop::collection::vec(prop::collection::vec(1u64..50, 3), 3),
            rp in Just(vec![0usize, 1, 2]).prop_shuffle(),
            cp in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            let t = ContingencyTable::new(counts.clone()).unwrap();
            let permuted = ContingencyTable::new(
                rp.iter().map(|&i| cp.iter().map(|&j| counts[i][j]).collect()).collect(),
            ).unwrap();
            let a: TestResult<f64> = chi_square_test(&t, false).unwrap();
            let b: TestResult<f64> = chi_square_test(&permuted, false).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-9 * (1.0 + a.statistic));
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
        }

        #[test]
        fn p_monotone_in_statistic(s1 in 0.0f64..60.0, s2 in 0.0f64..60.0, dof in 1usize..12) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let d = dof as f64;
            prop_assert!(chi_square_sf(hi, d).unwrap() <= chi_square_sf(lo, d).unwrap());
            prop_assert!(f_sf(hi, d, 20.0).unwrap() <= f_sf(lo, d, 20.0).unwrap());
        }
    }
}
