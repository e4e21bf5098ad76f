//! Synthetic cohorts with planted BMI-trajectory archetypes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::disease::Disease;
use super::records::{
    AgeGroup, Gender, Income, Insurance, Measurements, PatientStatic, Race, Residence,
    VisitRecord, BMI_RANGE, DBP_RANGE, HBA1C_RANGE, LDL_RANGE, SBP_RANGE,
};
use crate::error::{Error, Result};
use crate::rng::{rng_from, substream_index, Rng};
use crate::scalar::Scalar;

fn one() -> f64 {
    1.0
}
fn twelve() -> f64 {
    12.0
}
fn default_gap() -> (u32, u32) {
    (1, 6)
}
fn default_visits() -> (usize, usize) {
    (4, 12)
}

/// Categorical weights; `None` means uniform over the domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default)]
    pub age_group: Option<Vec<f64>>,
    #[serde(default)]
    pub gender: Option<Vec<f64>>,
    #[serde(default)]
    pub race: Option<Vec<f64>>,
    #[serde(default)]
    pub insurance: Option<Vec<f64>>,
    #[serde(default)]
    pub residence: Option<Vec<f64>>,
    #[serde(default)]
    pub income: Option<Vec<f64>>,
}

/// Per-lab (mean, sd); sampled values are clamped into the valid range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabProfile {
    pub hba1c: (f64, f64),
    pub sbp: (f64, f64),
    pub dbp: (f64, f64),
    pub ldl: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// Relative share of patients.
    #[serde(default = "one")]
    pub weight: f64,
    pub base_bmi: f64,
    #[serde(default)]
    pub slope_per_month: f64,
    #[serde(default)]
    pub osc_amplitude: f64,
    #[serde(default = "twelve")]
    pub osc_period_months: f64,
    #[serde(default)]
    pub noise_sd: f64,
    /// Inclusive range of the integer gap between visits, in months.
    #[serde(default = "default_gap")]
    pub gap_months: (u32, u32),
    /// Inclusive range of the number of visits.
    #[serde(default = "default_visits")]
    pub n_visits: (usize, usize),
    #[serde(default)]
    pub disease_prob: BTreeMap<Disease, f64>,
    #[serde(default)]
    pub demographics: Demographics,
    #[serde(default)]
    pub labs: Option<LabProfile>,
}

impl Archetype {
    /// Noise-free BMI at `t` months.
    pub fn expected_bmi(&self, t: u32) -> f64 {
        let t = f64::from(t);
        let osc = if self.osc_amplitude == 0.0 {
            0.0
        } else {
            self.osc_amplitude * (std::f64::consts::TAU * t / self.osc_period_months).sin()
        };
        self.base_bmi + self.slope_per_month * t + osc
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidArchetype {
                name: self.name.clone(),
                reason,
            })
        };
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise sd {} must be >= 0", self.noise_sd));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return bad(format!("weight {} must be >= 0", self.weight));
        }
        if !(BMI_RANGE.0..=BMI_RANGE.1).contains(&self.base_bmi) {
            return bad(format!("base BMI {} outside [10, 100]", self.base_bmi));
        }
        if self.osc_amplitude != 0.0 && !(self.osc_period_months > 0.0) {
            return bad("oscillation period must be > 0".into());
        }
        let (gmin, gmax) = self.gap_months;
        if gmin < 1 || gmin > gmax {
            return bad(format!("gap range ({gmin}, {gmax}) must satisfy 1 <= min <= max"));
        }
        let (vmin, vmax) = self.n_visits;
        if vmin < 2 || vmin > vmax {
            return bad(format!("visit range ({vmin}, {vmax}) must satisfy 2 <= min <= max"));
        }
        for (d, p) in &self.disease_prob {
            if !(0.0..=1.0).contains(p) {
                return bad(format!("probability {p} for {d} outside [0, 1]"));
            }
        }
        let d = &self.demographics;
        for (field, w, n) in [
            ("age_group", &d.age_group, AgeGroup::ALL.len()),
            ("gender", &d.gender, Gender::ALL.len()),
            ("race", &d.race, Race::ALL.len()),
            ("insurance", &d.insurance, Insurance::ALL.len()),
            ("residence", &d.residence, Residence::ALL.len()),
            ("income", &d.income, Income::ALL.len()),
        ] {
            if let Some(w) = w {
                if w.len() != n || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                    return bad(format!("{field} weights must be {n} non-negative values, not all zero"));
                }
            }
        }
        if let Some(l) = &self.labs {
            if [l.hba1c.1, l.sbp.1, l.dbp.1, l.ldl.1].iter().any(|s| !(*s >= 0.0)) {
                return bad("lab sd must be >= 0".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub patient_id: String,
    pub archetype: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T: Scalar> {
    pub visits: Vec<VisitRecord<T>>,
    pub statics: Vec<PatientStatic>,
    pub truth: Vec<TruthRow>,
}

/// Split `n` patients across archetypes proportionally to their weights
/// (largest remainder, ties to the earlier archetype).
fn allocate(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        let mut counts = vec![n / weights.len(); weights.len()];
        for c in counts.iter_mut().take(n % weights.len()) {
            *c += 1;
        }
        return counts;
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

fn pick<C: Copy>(rng: &mut Rng, domain: &[C], weights: &Option<Vec<f64>>) -> C {
    match weights {
        None => domain[rng.random_range(0..domain.len())],
        Some(w) => domain[WeightedIndex::new(w).expect("validated weights").sample(rng)],
    }
}

fn draw_lab(rng: &mut Rng, (mean, sd): (f64, f64), range: (f64, f64)) -> f64 {
    let v = if sd == 0.0 {
        mean
    } else {
        Normal::new(mean, sd).unwrap().sample(rng)
    };
    v.clamp(range.0, range.1)
}

/// Generate `n_patients` synthetic patients. Patient `i` draws from its own
/// substream of `seed`, so output is deterministic and independent of order.
pub fn synth_generate<T: Scalar>(
    archetypes: &[Archetype],
    n_patients: usize,
    seed: u64,
) -> Result<SynthOutput<T>> {
    if archetypes.is_empty() {
        return Err(Error::InvalidArgument("no archetypes given".into()));
    }
    for a in archetypes {
        a.validate()?;
    }
    let counts = allocate(&archetypes.iter().map(|a| a.weight).collect::<Vec<_>>(), n_patients);
    let mut out = SynthOutput {
        visits: Vec::new(),
        statics: Vec::with_capacity(n_patients),
        truth: Vec::with_capacity(n_patients),
    };
    let mut index = 0usize;
    for (ai, (arch, &count)) in archetypes.iter().zip(&counts).enumerate() {
        for _ in 0..count {
            let patient_id = format!("S{index:06}");
            let mut rng = rng_from(substream_index(seed, index as u64));
            index += 1;

            let n_visits = rng.random_range(arch.n_visits.0..=arch.n_visits.1);
            let mut months = Vec::with_capacity(n_visits);
            let mut t = 0u32;
            for v in 0..n_visits {
                if v > 0 {
                    t += rng.random_range(arch.gap_months.0..=arch.gap_months.1);
                }
                months.push(t);
            }
            let diagnoses: std::collections::BTreeSet<Disease> = arch
                .disease_prob
                .iter()
                .filter(|(_, &p)| p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p))
                .map(|(&d, _)| d)
                .collect();
            let noise = (arch.noise_sd > 0.0).then(|| Normal::new(0.0, arch.noise_sd).unwrap());
            for &t in &months {
                let mut bmi = arch.expected_bmi(t);
                if let Some(n) = &noise {
                    bmi += n.sample(&mut rng);
                }
                let bmi = bmi.clamp(BMI_RANGE.0, BMI_RANGE.1);
                let measurements = match &arch.labs {
                    None => Measurements::default(),
                    Some(l) => Measurements {
                        hba1c: Some(T::lit(draw_lab(&mut rng, l.hba1c, HBA1C_RANGE))),
                        sbp: Some(T::lit(draw_lab(&mut rng, l.sbp, SBP_RANGE))),
                        dbp: Some(T::lit(draw_lab(&mut rng, l.dbp, DBP_RANGE))),
                        ldl: Some(T::lit(draw_lab(&mut rng, l.ldl, LDL_RANGE))),
                    },
                };
                out.visits.push(VisitRecord {
                    patient_id: patient_id.clone(),
                    t_months: t,
                    bmi: T::lit(bmi),
                    diagnoses: diagnoses.clone(),
                    measurements,
                });
            }
            let d = &arch.demographics;
            out.statics.push(PatientStatic {
                patient_id: patient_id.clone(),
                age_group: pick(&mut rng, AgeGroup::ALL, &d.age_group),
                gender: pick(&mut rng, Gender::ALL, &d.gender),
                race: pick(&mut rng, Race::ALL, &d.race),
                insurance: pick(&mut rng, Insurance::ALL, &d.insurance),
                residence: pick(&mut rng, Residence::ALL, &d.residence),
                income: pick(&mut rng, Income::ALL, &d.income),
                prior_conditions: Default::default(),
            });
            out.truth.push(TruthRow {
                patient_id,
                archetype: ai,
            });
        }
    }
    Ok(out)
}

pub fn write_truth_csv<W: Write>(truth: &[TruthRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in truth {
        wtr.serialize(row).map_err(|e| Error::Csv {
            path: "<truth>".into(),
            source: e,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<truth>", e))?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<TruthRow>, _>>()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })
}

pub fn read_archetypes(path: &Path) -> Result<Vec<Archetype>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Three well-separated archetypes (stable normal, rising overweight, falling
/// obese) used by the examples and tests. Each patient has diabetes with
/// probability 1/2, so the diabetes cohort draws evenly from all three.
pub fn three_archetypes() -> Vec<Archetype> {
    let base = |name: &str, bmi: f64, slope: f64| Archetype {
        name: name.into(),
        weight: 1.0,
        base_bmi: bmi,
        slope_per_month: slope,
        osc_amplitude: 0.0,
        osc_period_months: 12.0,
        noise_sd: 0.3,
        gap_months: (1, 4),
        n_visits: (6, 14),
        disease_prob: BTreeMap::from([(Disease::Diabetes, 0.5)]),
        demographics: Demographics::default(),
        labs: None,
    };
    vec![
        base("stable_normal", 22.0, 0.0),
        base("rising_overweight", 26.0, 0.25),
        base("falling_obese", 40.0, -0.25),
    ]
}

/// Five archetypes with disease incidence spread over all 18 codes and lab
/// profiles, for whole-pipeline runs. The first archetype carries no disease
/// and supplies most of the controls.
pub fn disease_archetypes() -> Vec<Archetype> {
    let labs = |hba1c: f64, sbp: f64, ldl: f64| LabProfile {
        hba1c: (hba1c, 0.6),
        sbp: (sbp, 10.0),
        dbp: (sbp * 0.62, 6.0),
        ldl: (ldl, 20.0),
    };
    let arch = |name: &str, weight: f64, bmi: f64, slope: f64, osc: f64, base_p: f64, high: &[(Disease, f64)], l: LabProfile| {
        let mut disease_prob: BTreeMap<Disease, f64> = if base_p > 0.0 {
            Disease::ALL.iter().map(|&d| (d, base_p)).collect()
        } else {
            BTreeMap::new()
        };
        disease_prob.extend(high.iter().copied());
        Archetype {
            name: name.into(),
            weight,
            base_bmi: bmi,
            slope_per_month: slope,
            osc_amplitude: osc,
            osc_period_months: 10.0,
            noise_sd: 0.5,
            gap_months: (1, 6),
            n_visits: (4, 16),
            disease_prob,
            demographics: Demographics::default(),
            labs: Some(l),
        }
    };
    use Disease::*;
    vec![
        arch("healthy_stable", 2.0, 23.0, 0.0, 0.0, 0.0, &[], labs(5.4, 118.0, 100.0)),
        arch(
            "gaining",
            1.0,
            27.0,
            0.15,
            0.0,
            0.06,
            &[(Diabetes, 0.4), (Hypertension, 0.4), (Hyperlipidemia, 0.35), (Cardiac, 0.2)],
            labs(7.2, 138.0, 135.0),
        ),
        arch(
            "obese_plateau",
            1.0,
            37.0,
            0.0,
            1.0,
            0.06,
            &[(Obesity, 0.6), (Arthritis, 0.3), (Asthma, 0.25), (Bph, 0.15)],
            labs(6.6, 132.0, 125.0),
        ),
        arch(
            "losing",
            1.0,
            30.0,
            -0.15,
            0.0,
            0.06,
            &[(Cancer, 0.3), (Copd, 0.3), (Ckd, 0.25), (AFib, 0.2), (Stroke, 0.15)],
            labs(5.9, 126.0, 110.0),
        ),
        arch(
            "cycling_normal",
            1.0,
            24.0,
            0.0,
            1.5,
            0.06,
            &[
                (Depression, 0.3),
                (Anemia, 0.3),
                (Hypothyroidism, 0.3),
                (AlzheimersDementia, 0.15),
                (HipFractureOsteoporosis, 0.15),
            ],
            labs(5.6, 121.0, 105.0),
        ),
    ]
}
