//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod quad {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];

    /// Gauss-Kronrod 7/15 estimate and error on `[a, b]`.
    fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WGK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
            k += WGK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs())
    }

    /// Global adaptive integral over a finite interval: repeatedly bisect the
    /// subinterval with the largest error estimate until the summed error is
    /// below `1e-13` relative to the estimate or the interval budget runs out.
    pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let (k, e) = gk15(&f, a, b);
        let mut parts = vec![(a, b, k, e)];
        for _ in 0..1000 {
            let total: f64 = parts.iter().map(|p| p.2).sum();
            let err: f64 = parts.iter().map(|p| p.3).sum();
            if !(err > 1e-13 * total.abs()) {
                break;
            }
            let (i, _) = parts
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
                .unwrap();
            let (lo, hi, _, _) = parts.swap_remove(i);
            let m = 0.5 * (lo + hi);
            let (k1, e1) = gk15(&f, lo, m);
            let (k2, e2) = gk15(&f, m, hi);
            parts.push((lo, m, k1, e1));
            parts.push((m, hi, k2, e2));
        }
        parts.iter().map(|p| p.2).sum()
    }
}

pub mod oracle {
    use super::quad::integrate;

    /// Upper chi-squared tail by integrating the unnormalized density over
    /// `[0, s]` (as `x = u^2`) and `[s, inf)` (as `x = s / v^2`).
    pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
        let ln_h = |x: f64| (dof / 2.0 - 1.0) * x.ln() - x / 2.0;
        let lower = integrate(|u| 2.0 * u * (ln_h(u * u)).exp(), 0.0, stat.sqrt());
        let tail = integrate(
            |v| {
                let x = stat / (v * v);
                (ln_h(x) + (2.0 * stat).ln() - 3.0 * v.ln()).exp()
            },
            0.0,
            1.0,
        );
        tail / (lower + tail)
    }

    /// Upper F tail with the same splitting as [`chi_square_sf`].
    pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
        let ln_h = |x: f64| (d1 / 2.0 - 1.0) * x.ln() - (d1 + d2) / 2.0 * (d2 + d1 * x).ln();
        let lower = integrate(|u| 2.0 * u * (ln_h(u * u)).exp(), 0.0, f.sqrt());
        let tail = integrate(
            |v| {
                let x = f / (v * v);
                (ln_h(x) + (2.0 * f).ln() - 3.0 * v.ln()).exp()
            },
            0.0,
            1.0,
        );
        tail / (lower + tail)
    }

    /// Regularized upper incomplete gamma `Q(s, x)` for `x > 0`.
    pub fn gamma_q(s: f64, x: f64) -> f64 {
        let ln_h = |t: f64| (s - 1.0) * t.ln() - t;
        let lower = if s >= 1.0 {
            integrate(|t| ln_h(t).exp(), 0.0, x)
        } else {
            // t = u^(1/s) removes the singularity at 0
            integrate(|u| (-u.powf(1.0 / s)).exp(), 0.0, x.powf(s)) / s
        };
        let tail = integrate(
            |v| {
                let t = x / (v * v);
                (ln_h(t) + (2.0 * x).ln() - 3.0 * v.ln()).exp()
            },
            0.0,
            1.0,
        );
        tail / (lower + tail)
    }

    /// Regularized incomplete beta `I_x(a, b)`.
    pub fn beta_i(a: f64, b: f64, x: f64) -> f64 {
        let g = |t: f64| ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln()).exp();
        // integral of g over [0, hi] for hi <= 1/2
        let left = |hi: f64| {
            if a >= 1.0 {
                integrate(g, 0.0, hi)
            } else {
                integrate(|u| (1.0 - u.powf(1.0 / a)).powf(b - 1.0), 0.0, hi.powf(a)) / a
            }
        };
        // integral of g over [1/2, hi] for hi >= 1/2
        let right = |hi: f64| {
            if b >= 1.0 {
                integrate(g, 0.5, hi)
            } else {
                integrate(|v| (1.0 - v.powf(1.0 / b)).powf(a - 1.0), (1.0 - hi).powf(b), 0.5f64.powf(b)) / b
            }
        };
        let total = left(0.5) + right(1.0);
        let part = if x <= 0.5 { left(x) } else { left(0.5) + right(x) };
        part / total
    }
}

/// Minimum within-cluster sum of squares over every split into two
/// non-empty groups.
pub fn exhaustive_two_partition(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let d = rows[0].len();
    let sse = |idx: &[usize]| -> f64 {
        let m: Vec<f64> = (0..d)
            .map(|j| idx.iter().map(|&i| rows[i][j]).sum::<f64>() / idx.len() as f64)
            .collect();
        idx.iter()
            .map(|&i| (0..d).map(|j| (rows[i][j] - m[j]).powi(2)).sum::<f64>())
            .sum()
    };
    let mut best = f64::INFINITY;
    // fixing point 0 in the first group enumerates each split once
    for mask in 0u32..(1 << (n - 1)) {
        let (mut a, mut b) = (vec![0], Vec::new());
        for i in 1..n {
            if mask >> (i - 1) & 1 == 1 {
                b.push(i);
            } else {
                a.push(i);
            }
        }
        if !b.is_empty() {
            best = best.min(sse(&a) + sse(&b));
        }
    }
    best
}

/// DTW by enumerating every monotone alignment path.
pub fn dtw_exhaustive(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            go(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            go(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            go(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, 0, 0, 0.0, &mut best);
    best
}

/// The nine trajectory features computed with plain loops:
/// weighted mean, trend, up, down, max, max delta, start class, end class,
/// median. Classes are 0 underweight .. 3 obese.
pub fn features_brute(points: &[(u32, f64)]) -> [f64; 9] {
    let v = points.len();
    let mut w = vec![0.0; v];
    for i in 0..v {
        w[i] = if i == 0 { 1.0 } else { 1.0 / (points[i].0 - points[i - 1].0) as f64 };
    }
    let mut wsum = 0.0;
    let mut wx = 0.0;
    let mut wd = 0.0;
    for i in 0..v {
        wsum += w[i];
        wx += w[i] * points[i].1;
        let prev = if i == 0 { points[0].1 } else { points[i - 1].1 };
        wd += w[i] * (points[i].1 - prev);
    }
    let mut up = 0;
    let mut down = 0;
    let mut max = points[0].1;
    let mut max_delta = f64::NEG_INFINITY;
    for i in 1..v {
        let d = points[i].1 - points[i - 1].1;
        if d > 0.0 {
            up += 1;
        }
        if d < 0.0 {
            down += 1;
        }
        if d > max_delta {
            max_delta = d;
        }
        if points[i].1 > max {
            max = points[i].1;
        }
    }
    let class = |b: f64| -> f64 {
        if b < 18.5 {
            0.0
        } else if b < 25.0 {
            1.0
        } else if b < 30.0 {
            2.0
        } else {
            3.0
        }
    };
    // median by selection: count elements below and at each candidate
    let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let kth = |k: usize| -> f64 {
        for &c in &xs {
            let below = xs.iter().filter(|&&x| x < c).count();
            let at_most = xs.iter().filter(|&&x| x <= c).count();
            if below <= k && k < at_most {
                return c;
            }
        }
        unreachable!()
    };
    let median = if v % 2 == 1 { kth(v / 2) } else { (kth(v / 2 - 1) + kth(v / 2)) / 2.0 };
    [
        wx / wsum,
        wd / wsum,
        up as f64 / v as f64,
        down as f64 / v as f64,
        max,
        max_delta,
        class(points[0].1),
        class(points[v - 1].1),
        median,
    ]
}
