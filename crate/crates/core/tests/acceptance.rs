//! Acceptance run: nine end-to-end criteria, each printed as one PASS/FAIL
//! line. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use bmi_subtype::cluster::{
    adjusted_rand_index, agglomerative_fit, kmeans_fit, standardize_matrix, ClusterMethod, KMeansConfig, Linkage,
};
use bmi_subtype::features::{extract_feature_vector, BmiCategory, FeatureRow};
use bmi_subtype::ingest::synth::{disease_archetypes, synth_generate, three_archetypes};
use bmi_subtype::ingest::{build_trajectories, write_statics_csv, write_visits_csv, PatientStatic, Trajectory};
use bmi_subtype::pipeline::{run_pipeline, stage_cluster, KChoice, RunConfig};
use bmi_subtype::relevance::{cross_validate, BoostParams};
use bmi_subtype::rng::{rng_from, substream};
use bmi_subtype::shapes::{
    circular_shift, cluster_shape_summary, dba_mean, dtw_distance, sbd_distance, ShapeOptions, DBA_MAX_ITER,
};
use bmi_subtype::stats::{anova_f_test, chi_square_sf, chi_square_test, relative_risk, ContingencyTable, Incidence};
use bmi_subtype::Matrix;

use common::{dtw_exhaustive, exhaustive_two_partition, features_brute, oracle};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_trajectory(rng: &mut bmi_subtype::rng::Rng, id: usize) -> Trajectory<f64> {
    let v = rng.random_range(2..=40);
    let mut t = 0u32;
    let mut pts = Vec::with_capacity(v);
    for i in 0..v {
        if i > 0 {
            t += rng.random_range(1..=12);
        }
        // one-decimal readings make ties and flat steps common
        let bmi = (rng.random_range(150..=600) as f64) / 10.0;
        pts.push((t, bmi));
    }
    Trajectory::new(format!("P{id}"), pts).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn c1_features() -> Verdict {
    let mut rng = rng_from(substream(1, "acceptance:features"));
    let mut worst = 0.0f64;
    let mut bad = 0;
    for i in 0..1000 {
        let traj = random_trajectory(&mut rng, i);
        let got = extract_feature_vector(&traj).unwrap().to_array();
        let want = features_brute(traj.points());
        let e = got.iter().zip(&want).map(|(&g, &w)| rel_err(g, w)).fold(0.0, f64::max);
        worst = worst.max(e);
        if e > 1e-12 {
            bad += 1;
        }
    }
    let ex = Trajectory::new("ex", vec![(0, 30.0), (1, 32.0), (3, 31.0)]).unwrap();
    let f = extract_feature_vector(&ex).unwrap();
    let example_ok = f.weighted_mean == 31.0
        && f.trend == 0.6
        && f.up_norm == 1.0 / 3.0
        && f.down_norm == 1.0 / 3.0
        && f.bmi_max == 32.0
        && f.bmi_max_delta == 2.0
        && f.cat_start == BmiCategory::Obese
        && f.cat_end == BmiCategory::Obese
        && f.median == 31.0;
    verdict(
        bad == 0 && example_ok,
        format!("1000 trajectories, {bad} mismatches, worst rel err {worst:.1e}; worked example exact: {example_ok}"),
    )
}

fn c2_kmeans_optimality() -> Verdict {
    let mut rng = rng_from(substream(2, "acceptance:kmeans"));
    let mut hits = 0;
    for inst in 0..200u64 {
        let n = rng.random_range(3..=8);
        let d = rng.random_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let fit = kmeans_fit(&x, &KMeansConfig::new(2, inst).with_n_init(50)).unwrap();
        let opt = exhaustive_two_partition(&rows);
        if fit.inertia <= opt * (1.0 + 1e-9) + 1e-12 {
            hits += 1;
        }
    }
    let rate = hits as f64 / 200.0;
    verdict(rate >= 0.99, format!("{hits}/200 instances at the exhaustive optimum ({:.1}%)", rate * 100.0))
}

fn c3_planted_recovery() -> Verdict {
    let mut k3 = 0;
    let mut ari_ok = 0;
    let mut min_ari = f64::INFINITY;
    for seed in 0..50u64 {
        let out = synth_generate::<f64>(&three_archetypes(), 600, 1000 + seed).unwrap();
        let truth: BTreeMap<&str, usize> = out.truth.iter().map(|t| (t.patient_id.as_str(), t.archetype)).collect();
        let set = build_trajectories(&out.visits);
        let rows: Vec<FeatureRow<f64>> = set
            .trajectories
            .iter()
            .map(|t| FeatureRow {
                patient_id: t.patient_id().to_string(),
                features: extract_feature_vector(t).unwrap(),
                label: 0,
            })
            .collect();
        let want: Vec<usize> = rows.iter().map(|r| truth[r.patient_id.as_str()]).collect();
        let st = stage_cluster(&rows, KChoice::Auto, 2, 10, ClusterMethod::KMeans, seed).unwrap();
        let ari = adjusted_rand_index(&st.model.assignments, &want);
        min_ari = min_ari.min(ari);
        k3 += usize::from(st.model.k == 3);
        ari_ok += usize::from(ari >= 0.9);
    }
    verdict(
        k3 >= 45 && ari_ok as f64 >= 0.95 * 50.0,
        format!("elbow chose k=3 in {k3}/50 seeds, ARI >= 0.9 in {ari_ok}/50 (min {min_ari:.3})"),
    )
}

fn c4_dtw_exact() -> Verdict {
    let mut seqs: Vec<Vec<f64>> = Vec::new();
    for len in 1..=5u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            seqs.push(
                (0..len)
                    .map(|_| {
                        let s = (c % 3) as f64;
                        c /= 3;
                        s
                    })
                    .collect(),
            );
        }
    }
    let mut bad = 0usize;
    let mut pairs = 0usize;
    for a in &seqs {
        for b in &seqs {
            pairs += 1;
            if dtw_distance(a, b, None).unwrap() != dtw_exhaustive(a, b) {
                bad += 1;
            }
        }
    }
    let example = dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 3.0], None).unwrap();
    verdict(
        bad == 0 && example == 1.0,
        format!("{pairs} pairs, {bad} mismatches; [1,2,3] vs [1,3] = {example}"),
    )
}

fn c5_shapes() -> Verdict {
    let mut rng = rng_from(substream(5, "acceptance:shapes"));
    let mut worst_shift = 0.0f64;
    for _ in 0..100 {
        let (a1, a2, p1, p2) = (
            rng.random_range(0.5..3.0),
            rng.random_range(0.0..1.5),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let base = rng.random_range(20.0..40.0);
        let x: Vec<f64> = (0..24)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 24.0;
                base + a1 * (t + p1).sin() + a2 * (2.0 * t + p2).sin()
            })
            .collect();
        for s in 0..24 {
            worst_shift = worst_shift.max(sbd_distance(&x, &circular_shift(&x, s)).unwrap());
        }
    }

    let mut violations = 0;
    for _ in 0..100 {
        let triple: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let len = rng.random_range(4..=16);
                (0..len).map(|_| rng.random_range(20.0..40.0)).collect()
            })
            .collect();
        let r = dba_mean(&triple, rng.random_range(4..=12), DBA_MAX_ITER).unwrap();
        violations += r.objective_trace.windows(2).filter(|w| w[1] > w[0]).count();
    }

    let noise = Normal::new(0.0, 0.4).unwrap();
    let mut make = |n: usize, f: &dyn Fn(f64) -> f64, tag: &str| -> Vec<Trajectory<f64>> {
        (0..n)
            .map(|i| {
                let v = rng.random_range(6..=18);
                let pts = (0..v)
                    .map(|j| {
                        let frac = j as f64 / (v - 1) as f64;
                        (3 * j as u32, f(frac) + noise.sample(&mut rng))
                    })
                    .collect();
                Trajectory::new(format!("{tag}{i}"), pts).unwrap()
            })
            .collect()
    };
    let flat = make(40, &|_| 38.0, "F");
    let rising = make(40, &|u| 22.0 + 8.0 * u, "R");
    let opts = ShapeOptions::default();
    let level = |trajs: &[Trajectory<f64>], id: usize| {
        let refs: Vec<&Trajectory<f64>> = trajs.iter().collect();
        let s = cluster_shape_summary(id, &refs, &opts).unwrap();
        s.representative_bmi.iter().sum::<f64>() / s.representative_bmi.len() as f64
    };
    let (lf, lr) = (level(&flat, 0), level(&rising, 1));
    verdict(
        worst_shift <= 1e-9 && violations == 0 && (lf - lr).abs() > 5.0,
        format!(
            "worst SBD under circular shift {worst_shift:.1e}; {violations} DBA objective increases; \
             representative levels {lf:.2} vs {lr:.2}"
        ),
    )
}

fn c6_statistics() -> Verdict {
    let mut worst = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut cases = 0;
    for &dof in &[1.0, 2.0, 3.0, 5.0, 10.0] {
        for &q in &[0.2, 0.8, 1.5, 3.0, 6.0] {
            let stat = q * dof;
            let got: f64 = chi_square_sf(stat, dof).unwrap();
            worst = worst.max((got - oracle::chi_square_sf(stat, dof)).abs());
            cases += 1;
        }
    }
    // one-way ANOVA on random groups, statistic recomputed independently
    let mut rng = rng_from(substream(6, "acceptance:anova"));
    for _ in 0..25 {
        let k = rng.random_range(2..=5);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| {
                let n = rng.random_range(2..=12);
                (0..n).map(|_| rng.random_range(0.0..10.0) + 0.5 * g as f64).collect()
            })
            .collect();
        let all: Vec<f64> = groups.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let grand = all.iter().sum::<f64>() / n;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for g in &groups {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            ssb += g.len() as f64 * (m - grand).powi(2);
            ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
        }
        let (d1, d2) = (k as f64 - 1.0, n - k as f64);
        let f = (ssb / d1) / (ssw / d2);
        let r = anova_f_test(&groups).unwrap();
        worst = worst.max((r.p_value - oracle::f_sf(f, d1, d2)).abs());
        worst_f = worst_f.max(rel_err(r.statistic, f));
        cases += 1;
    }
    let p_crit: f64 = chi_square_sf(3.841, 1.0).unwrap();
    let table = ContingencyTable::new(vec![vec![10, 10], vec![10, 10]]).unwrap();
    let p_equal = chi_square_test::<f64>(&table, false).unwrap().p_value;
    let rr = relative_risk::<f64>(Incidence::new(30, 100), Incidence::new(10, 100)).unwrap().rr;
    verdict(
        worst <= 1e-6 && worst_f <= 1e-9 && (p_crit - 0.05).abs() <= 0.001 && p_equal == 1.0 && rr == 3.0,
        format!(
            "{cases} (statistic, dof) cases, worst |p - quadrature| {worst:.1e}; worst F rel err {worst_f:.1e}; chi2(3.841, 1) p = {p_crit:.4}; \
             balanced 2x2 p = {p_equal}; RR(30/100, 10/100) = {rr}"
        ),
    )
}

/// Patients whose label is a noisy threshold on peak BMI and trend.
fn threshold_cohort(n: usize, seed: u64) -> (Matrix<f64>, Vec<u8>) {
    let mut rng = rng_from(seed);
    let noise = Normal::new(0.0, 0.4).unwrap();
    let feats: Vec<[f64; 9]> = (0..n)
        .map(|i| {
            let base = rng.random_range(20.0..42.0);
            let slope = rng.random_range(-0.3..0.3);
            let v = rng.random_range(4..=14);
            let mut t = 0;
            let pts = (0..v)
                .map(|j| {
                    if j > 0 {
                        t += rng.random_range(1..=4);
                    }
                    (t, (base + slope * t as f64 + noise.sample(&mut rng)).clamp(12.0, 90.0))
                })
                .collect();
            let traj = Trajectory::new(format!("T{i}"), pts).unwrap();
            extract_feature_vector(&traj).unwrap().to_array()
        })
        .collect();
    let x = Matrix::from_rows(&feats).unwrap();
    let z = standardize_matrix(&x).unwrap().data;
    let eps = Normal::new(0.0, 0.5).unwrap();
    let y = (0..n)
        .map(|i| u8::from(z.get(i, 4) + z.get(i, 1) + eps.sample(&mut rng) > 0.0))
        .collect();
    (z, y)
}

fn c7_relevance() -> Verdict {
    let params = BoostParams::default();
    let (x, y) = threshold_cohort(600, substream(7, "acceptance:relevance"));
    let auc = cross_validate(&x, &y, 5, &params, 7).unwrap().auc_mean;
    let mut shuffled = Vec::new();
    for seed in 0..20u64 {
        let mut rng = rng_from(substream(seed, "acceptance:shuffle"));
        let (x, mut y) = threshold_cohort(600, substream(seed, "acceptance:null-cohort"));
        y.shuffle(&mut rng);
        shuffled.push(cross_validate(&x, &y, 5, &params, seed).unwrap().auc_mean);
    }
    let mean = shuffled.iter().sum::<f64>() / shuffled.len() as f64;
    let (lo, hi) = shuffled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
    verdict(
        auc >= 0.85 && (0.45..=0.55).contains(&mean),
        format!("threshold cohort AUC {auc:.3}; shuffled labels mean AUC {mean:.3} over 20 seeds (range {lo:.3}..{hi:.3})"),
    )
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("timings_ms");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = std::fs::read(&p).unwrap();
            if p.file_name().unwrap() == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                strip(&mut v);
                bytes = v.to_string().into_bytes();
            }
            out.insert(p.strip_prefix(root).unwrap().display().to_string(), bytes);
        }
    }
    out
}

fn c8_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_generate::<f64>(&disease_archetypes(), 5000, 8).unwrap();
    let visits = tmp.path().join("visits.csv");
    let statics = tmp.path().join("statics.csv");
    write_visits_csv(&data.visits, std::fs::File::create(&visits).unwrap()).unwrap();
    let st: &[PatientStatic] = &data.statics;
    write_statics_csv(st, std::fs::File::create(&statics).unwrap()).unwrap();
    let cfg = RunConfig::new(&visits, &statics, tmp.path().join("out"), 8);

    let start = Instant::now();
    let first = run_pipeline(&cfg).unwrap();
    let elapsed = start.elapsed();
    let a = snapshot(&cfg.out);
    std::fs::remove_dir_all(&cfg.out).unwrap();
    let second = run_pipeline(&cfg).unwrap();
    let b = snapshot(&cfg.out);

    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let ok_cohorts = first.n_ok();
    verdict(
        differing.is_empty()
            && a.len() == b.len()
            && ok_cohorts == 19
            && second.n_ok() == 19
            && elapsed < Duration::from_secs(600),
        format!(
            "{} files compared, {} differ; {ok_cohorts}/19 cohorts ok; 5000-patient run took {:.1} s",
            a.len(),
            differing.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c9_ward_vs_kmeans() -> Verdict {
    let mut min_ari = f64::INFINITY;
    for seed in 0..20u64 {
        let mut rng = rng_from(substream(seed, "acceptance:blobs"));
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centres: Vec<Vec<f64>> = (0..4).map(|_| (0..9).map(|_| rng.random_range(-6.0..6.0)).collect()).collect();
        let rows: Vec<Vec<f64>> = centres
            .iter()
            .flat_map(|c| (0..50).map(|_| c.iter().map(|&m| m + noise.sample(&mut rng)).collect::<Vec<_>>()).collect::<Vec<_>>())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let km = kmeans_fit(&x, &KMeansConfig::new(4, seed)).unwrap();
        let ward = agglomerative_fit(&x, 4, Linkage::Ward).unwrap();
        min_ari = min_ari.min(adjusted_rand_index(&km.assignments, &ward));
    }
    verdict(min_ari >= 0.9, format!("minimum ARI(ward, k-means) over 20 blob sets {min_ari:.3}"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, Option<u64>); 9] = [
        ("feature oracle equivalence", c1_features, Some(5)),
        ("k-means optimality at tiny scale", c2_kmeans_optimality, Some(30)),
        ("planted-subtype recovery", c3_planted_recovery, Some(120)),
        ("DTW exactness", c4_dtw_exact, None),
        ("shape pipeline", c5_shapes, None),
        ("statistics oracle", c6_statistics, None),
        ("relevance protocol", c7_relevance, None),
        ("determinism and end-to-end runtime", c8_determinism, Some(600)),
        ("agglomerative comparison", c9_ward_vs_kmeans, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l as f64);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let budget = limit.map_or(String::new(), |l| format!(", limit {l} s"));
        println!(
            "{} {}. {name}: {} ({secs:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
