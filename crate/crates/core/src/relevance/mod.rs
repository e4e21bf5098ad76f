//! Gradient-boosted shallow trees on the trajectory features and stratified
//! cross-validation of disease prediction.

mod tree;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::{Node, Tree};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from, substream, substream_index};
use crate::scalar::Scalar;

const MIN_TRAIN_ROWS: usize = 20;
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum summed hessian on each side of a split.
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 2,
            lambda: 1.0,
            min_child_weight: 1e-3,
        }
    }
}

/// Depths and learning rates tried by [`tune`].
pub const TUNING_DEPTHS: [usize; 3] = [1, 2, 3];
pub const TUNING_RATES: [f64; 3] = [0.05, 0.1, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostedModel<T: Scalar> {
    pub n_features: usize,
    pub base_score: T,
    pub learning_rate: T,
    pub n_rounds: usize,
    pub seed: u64,
    pub trees: Vec<Tree<T>>,
    /// Mean training log-loss before the first round and after each round.
    pub loss_trace: Vec<T>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn log_loss<T: Scalar>(y: &[u8], margin: &[T]) -> T {
    // log(1 + e^z) - y z, evaluated stably
    let total: T = y
        .iter()
        .zip(margin)
        .map(|(&yi, &z)| {
            let softplus = if z > T::zero() {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - if yi == 1 { z } else { T::zero() }
        })
        .sum();
    total / T::from_usize_lossy(y.len())
}

fn check_labels(y: &[u8]) -> Result<(usize, usize)> {
    if let Some(&b) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("labels must be 0 or 1, got {b}")));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    Ok((pos, y.len() - pos))
}

/// Fit a boosted ensemble on logistic loss. Every round adds one tree of
/// depth at most `max_depth`, grown by exact greedy search over feature
/// thresholds with Newton leaf values. The fit has no random component; the
/// seed is recorded with the model.
pub fn fit_boosted<T: Scalar>(x: &Matrix<T>, y: &[u8], params: &BoostParams, seed: u64) -> Result<BoostedModel<T>> {
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() < MIN_TRAIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "boosting needs at least {MIN_TRAIN_ROWS} rows, got {}",
            x.rows()
        )));
    }
    let (pos, neg) = check_labels(y)?;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("boosting needs both classes".into()));
    }
    if !(params.learning_rate > 0.0) || !(params.lambda >= 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive and lambda non-negative".into()));
    }
    let n = x.rows();
    let base = T::from_usize_lossy(pos).ln() - T::from_usize_lossy(neg).ln();
    let lr = T::lit(params.learning_rate);
    let mut margin = vec![base; n];
    let sorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.get(a, f).partial_cmp(&x.get(b, f)).expect("finite features").then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut loss_trace = vec![log_loss(y, &margin)];
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - if y[i] == 1 { T::one() } else { T::zero() };
            hess[i] = p * (T::one() - p);
        }
        let tree = tree::TreeBuilder {
            x,
            sorted: &sorted,
            grad: &grad,
            hess: &hess,
            lambda: T::lit(params.lambda),
            max_depth: params.max_depth,
            min_child_hess: T::lit(params.min_child_weight),
        }
        .build();
        for (i, m) in margin.iter_mut().enumerate() {
            *m = *m + lr * tree.predict_row(x.row(i));
        }
        loss_trace.push(log_loss(y, &margin));
        trees.push(tree);
    }
    Ok(BoostedModel {
        n_features: x.cols(),
        base_score: base,
        learning_rate: lr,
        n_rounds: params.n_rounds,
        seed,
        trees,
        loss_trace,
    })
}

/// Positive-class probabilities `sigmoid(base + lr * sum of trees)`.
pub fn predict_proba<T: Scalar>(model: &BoostedModel<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    if x.cols() != model.n_features {
        return Err(Error::Dimension {
            expected: model.n_features,
            got: x.cols(),
        });
    }
    Ok(x.iter_rows()
        .map(|r| {
            let z = model
                .trees
                .iter()
                .fold(model.base_score, |acc, t| acc + model.learning_rate * t.predict_row(r));
            sigmoid(z)
        })
        .collect())
}

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// count one half.
pub fn auc_score<T: Scalar>(y: &[u8], scores: &[T]) -> Result<f64> {
    if y.len() != scores.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: scores.len(),
        });
    }
    let (pos, neg) = check_labels(y)?;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average ranks over tie blocks, then the rank-sum form of U
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * idx[i..=j].iter().filter(|&&k| y[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Stratified fold index per row: each class is shuffled with the seed and
/// dealt round-robin, continuing the rotation from one class to the next.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let (pos, neg) = check_labels(y)?;
    if pos < folds || neg < folds {
        return Err(Error::InsufficientData(format!(
            "each class needs at least {folds} members to stratify (positives {pos}, negatives {neg})"
        )));
    }
    let mut rng = rng_from(substream(seed, "folds"));
    let mut out = vec![0; y.len()];
    let mut next = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub auc: f64,
}

/// Cross-validation summary; `*_ci` are 95% half-widths over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub accuracy_mean: f64,
    pub accuracy_ci: f64,
    pub auc_mean: f64,
    pub auc_ci: f64,
    pub folds: Vec<FoldScore>,
    pub params: BoostParams,
    pub seed: u64,
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, Z_95 * var.sqrt() / n.sqrt())
}

/// Stratified k-fold cross-validation of [`fit_boosted`]. Accuracy uses a
/// 0.5 probability threshold. Folds are trained in parallel.
pub fn cross_validate<T: Scalar>(
    x: &Matrix<T>,
    y: &[u8],
    folds: usize,
    params: &BoostParams,
    seed: u64,
) -> Result<CvReport> {
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let assign = stratified_folds(y, folds, seed)?;
    let scores: Vec<FoldScore> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| assign[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| assign[i] == f).collect();
            let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let model = fit_boosted(&x.select_rows(&train), &ytr, params, substream_index(seed, f as u64))?;
            let p = predict_proba(&model, &x.select_rows(&test))?;
            let half = T::lit(0.5);
            let correct = p.iter().zip(&yte).filter(|(&pi, &yi)| (pi >= half) == (yi == 1)).count();
            Ok(FoldScore {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                accuracy: correct as f64 / test.len() as f64,
                auc: auc_score(&yte, &p)?,
            })
        })
        .collect::<Result<_>>()?;
    let (accuracy_mean, accuracy_ci) = mean_ci(&scores.iter().map(|s| s.accuracy).collect::<Vec<_>>());
    let (auc_mean, auc_ci) = mean_ci(&scores.iter().map(|s| s.auc).collect::<Vec<_>>());
    Ok(CvReport {
        accuracy_mean,
        accuracy_ci,
        auc_mean,
        auc_ci,
        folds: scores,
        params: *params,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best: CvReport,
    /// `(max_depth, learning_rate, auc_mean)` for every grid point.
    pub grid: Vec<(usize, f64, f64)>,
}

/// Cross-validate every depth/learning-rate pair in the tuning grid with the
/// same folds and keep the pair with the highest mean AUC (first on ties).
/// The selected score is optimistic because selection and evaluation share
/// the folds.
pub fn tune<T: Scalar>(x: &Matrix<T>, y: &[u8], folds: usize, base: &BoostParams, seed: u64) -> Result<TuningResult> {
    let mut best: Option<CvReport> = None;
    let mut grid = Vec::new();
    for depth in TUNING_DEPTHS {
        for lr in TUNING_RATES {
            let p = BoostParams {
                max_depth: depth,
                learning_rate: lr,
                ..*base
            };
            let r = cross_validate(x, y, folds, &p, seed)?;
            grid.push((depth, lr, r.auc_mean));
            if best.as_ref().is_none_or(|b| r.auc_mean > b.auc_mean) {
                best = Some(r);
            }
        }
    }
    Ok(TuningResult {
        best: best.expect("grid is non-empty"),
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn data(n: usize, seed: u64, f: impl Fn(&[f64], &mut crate::rng::Rng) -> u8) -> (Matrix<f64>, Vec<u8>) {
        let mut rng = rng_from(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..9).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = rows.iter().map(|r| f(r, &mut rng)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[0, 1, 1], &[0.1, 0.9, 0.5]).unwrap(), 1.0);
        assert_eq!(auc_score(&[0, 0, 1, 1], &[0.3, 0.3, 0.3, 0.3]).unwrap(), 0.5);
        assert_eq!(auc_score(&[1, 1, 0], &[0.1, 0.2, 0.9]).unwrap(), 0.0);
        assert_eq!(auc_score(&[0, 1, 0, 1], &[0.2, 0.2, 0.1, 0.7]).unwrap(), 0.875);
        assert!(auc_score(&[1, 1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn zero_rounds_predicts_prevalence() {
        let (x, y) = data(40, 1, |r, _| (r[0] > 0.0) as u8);
        let p = BoostParams {
            n_rounds: 0,
            ..Default::default()
        };
        let m = fit_boosted(&x, &y, &p, 0).unwrap();
        let prev = y.iter().filter(|&&v| v == 1).count() as f64 / 40.0;
        for q in predict_proba(&m, &x).unwrap() {
            assert!((q - prev).abs() < 1e-12);
        }
    }

    #[test]
    fn single_split_gives_two_levels() {
        let (x, y) = data(50, 2, |r, _| (r[4] > 0.3) as u8);
        let p = BoostParams {
            n_rounds: 1,
            max_depth: 1,
            ..Default::default()
        };
        let m = fit_boosted(&x, &y, &p, 0).unwrap();
        let mut levels = predict_proba(&m, &x).unwrap();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels.len(), 2);
        assert!(matches!(m.trees[0].nodes[0], Node::Split { feature: 4, .. }));
    }

    #[test]
    fn threshold_label_is_learned() {
        let (x, y) = data(200, 3, |r, _| (r[4] > 0.0) as u8);
        let m = fit_boosted(&x, &y, &BoostParams::default(), 0).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        let acc = p.iter().zip(&y).filter(|(&q, &t)| (q >= 0.5) == (t == 1)).count() as f64 / 200.0;
        assert!(acc >= 0.95);
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
        assert_eq!(m.trees.len(), 200);
        // mean prediction approaches prevalence on the training data
        let prev = y.iter().filter(|&&v| v == 1).count() as f64 / 200.0;
        assert!((p.iter().sum::<f64>() / 200.0 - prev).abs() < 0.01);
    }

    #[test]
    fn input_errors() {
        let (x, y) = data(30, 4, |_, _| 1);
        assert!(fit_boosted(&x, &y, &BoostParams::default(), 0).is_err());
        let (x, y) = data(10, 4, |r, _| (r[0] > 0.0) as u8);
        assert!(fit_boosted(&x, &y, &BoostParams::default(), 0).is_err());
        let (x, y) = data(30, 4, |r, _| (r[0] > 0.0) as u8);
        let m = fit_boosted(&x, &y, &BoostParams::default(), 0).unwrap();
        assert!(predict_proba(&m, &Matrix::<f64>::zeros(3, 4)).is_err());
    }

    #[test]
    fn cv_separable_and_deterministic() {
        let (x, y) = data(300, 5, |r, _| (r[0] + 0.5 * r[1] > 0.0) as u8);
        let a = cross_validate(&x, &y, 5, &BoostParams::default(), 9).unwrap();
        assert!(a.auc_mean >= 0.95, "{}", a.auc_mean);
        assert_eq!(a.folds.len(), 5);
        assert!(a.accuracy_ci >= 0.0 && a.auc_ci >= 0.0);
        let b = cross_validate(&x, &y, 5, &BoostParams::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cv_shuffled_labels_near_half() {
        let mut total = 0.0;
        for s in 0..5 {
            let (x, y) = data(300, 100 + s, |_, rng| rng.random_range(0..2));
            total += cross_validate(&x, &y, 5, &BoostParams::default(), s).unwrap().auc_mean;
        }
        let m = total / 5.0;
        assert!((0.42..=0.58).contains(&m), "{m}");
    }

    #[test]
    fn tuning_grid_covers_all_pairs() {
        let (x, y) = data(120, 6, |r, _| (r[2] > 0.0) as u8);
        let p = BoostParams {
            n_rounds: 20,
            ..Default::default()
        };
        let t = tune(&x, &y, 5, &p, 1).unwrap();
        assert_eq!(t.grid.len(), 9);
        let best = t.grid.iter().map(|g| g.2).fold(f64::MIN, f64::max);
        assert_eq!(t.best.auc_mean, best);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn loss_non_increasing(seed in 0u64..1000, noise in 0.0f64..0.4) {
            let (x, y) = data(60, seed, |r, rng| ((r[1] > 0.0) ^ rng.random_bool(noise)) as u8);
            prop_assume!(y.iter().any(|&v| v == 1) && y.iter().any(|&v| v == 0));
            let p = BoostParams { n_rounds: 30, ..Default::default() };
            let m = fit_boosted(&x, &y, &p, seed).unwrap();
            for w in m.loss_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for q in predict_proba(&m, &x).unwrap() {
                prop_assert!(q > 0.0 && q < 1.0);
            }
        }

        #[test]
        fn auc_invariant_to_monotone_transform(
            pairs in prop::collection::vec((0u8..2, -5.0f64..5.0), 4..40)
        ) {
            let (y, s): (Vec<u8>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (0.7 * v).exp() * 3.0 + 1.0).collect();
            prop_assert!((auc_score(&y, &s).unwrap() - auc_score(&y, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn folds_are_balanced(y in prop::collection::vec(0u8..2, 20..200), seed in 0u64..100) {
            let pos = y.iter().filter(|&&v| v == 1).count();
            prop_assume!(pos >= 5 && y.len() - pos >= 5);
            let f = stratified_folds(&y, 5, seed).unwrap();
            for class in [0u8, 1] {
                let counts: Vec<usize> = (0..5)
                    .map(|k| (0..y.len()).filter(|&i| f[i] == k && y[i] == class).count())
                    .collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
