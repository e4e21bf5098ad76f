//! The nine engineered BMI-trajectory features.
//!
//! Visit weights are the reciprocal month gap to the previous visit,
//! `w_v = 1 / (t_v - t_{v-1})`; the first visit has no predecessor and gets
//! weight 1. Differences at the first visit are zero (`x_0 = x_1`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::records::BMI_RANGE;
use crate::ingest::Trajectory;
use crate::scalar::Scalar;

/// Number of columns in a [`FeatureVector`].
pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "weighted_mean",
    "trend",
    "up_norm",
    "down_norm",
    "bmi_max",
    "bmi_max_delta",
    "cat_start",
    "cat_end",
    "median",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BmiCategory {
    Underweight,
    Normal,
    Overweight,
    Obese,
}

impl BmiCategory {
    pub const ALL: [BmiCategory; 4] = [
        BmiCategory::Underweight,
        BmiCategory::Normal,
        BmiCategory::Overweight,
        BmiCategory::Obese,
    ];

    /// Ordinal code 0..=3.
    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            BmiCategory::Underweight => "underweight",
            BmiCategory::Normal => "normal",
            BmiCategory::Overweight => "overweight",
            BmiCategory::Obese => "obese",
        }
    }
}

impl fmt::Display for BmiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BmiCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BmiCategory::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownCategory {
                field: "bmi_category",
                value: s.to_string(),
            })
    }
}

impl Serialize for BmiCategory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for BmiCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Lower bounds of the normal, overweight and obese classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BmiCutoffs<T: Scalar> {
    pub normal: T,
    pub overweight: T,
    pub obese: T,
}

impl<T: Scalar> Default for BmiCutoffs<T> {
    /// CDC adult cutoffs 18.5 / 25 / 30.
    fn default() -> Self {
        BmiCutoffs {
            normal: T::lit(18.5),
            overweight: T::lit(25.0),
            obese: T::lit(30.0),
        }
    }
}

impl<T: Scalar> BmiCutoffs<T> {
    pub fn validate(&self) -> Result<()> {
        if self.normal < self.overweight && self.overweight < self.obese {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "BMI cutoffs must be strictly increasing".into(),
            ))
        }
    }

    pub fn classify(&self, bmi: T) -> Result<BmiCategory> {
        if !(bmi >= T::lit(BMI_RANGE.0) && bmi <= T::lit(BMI_RANGE.1)) {
            return Err(Error::Domain(format!("BMI {bmi} outside [10, 100]")));
        }
        Ok(if bmi < self.normal {
            BmiCategory::Underweight
        } else if bmi < self.overweight {
            BmiCategory::Normal
        } else if bmi < self.obese {
            BmiCategory::Overweight
        } else {
            BmiCategory::Obese
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<T: Scalar> {
    pub weighted_mean: T,
    pub trend: T,
    pub up_norm: T,
    pub down_norm: T,
    pub bmi_max: T,
    pub bmi_max_delta: T,
    pub cat_start: BmiCategory,
    pub cat_end: BmiCategory,
    pub median: T,
}

impl<T: Scalar> FeatureVector<T> {
    /// Numeric row with categories ordinal-encoded, in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [T; N_FEATURES] {
        [
            self.weighted_mean,
            self.trend,
            self.up_norm,
            self.down_norm,
            self.bmi_max,
            self.bmi_max_delta,
            T::from_u8(self.cat_start.ordinal()).unwrap(),
            T::from_u8(self.cat_end.ordinal()).unwrap(),
            self.median,
        ]
    }
}

fn weights<T: Scalar>(traj: &Trajectory<T>) -> impl Iterator<Item = T> + '_ {
    let pts = traj.points();
    (0..pts.len()).map(move |v| {
        if v == 0 {
            T::one()
        } else {
            T::one() / T::from_u32(pts[v].0 - pts[v - 1].0).unwrap()
        }
    })
}

/// Gap-weighted mean BMI.
pub fn weighted_mean<T: Scalar>(traj: &Trajectory<T>) -> T {
    let (num, den) = weights(traj)
        .zip(traj.points())
        .fold((T::zero(), T::zero()), |(n, d), (w, p)| (n + w * p.1, d + w));
    num / den
}

/// Gap-weighted mean of consecutive BMI differences.
pub fn trend<T: Scalar>(traj: &Trajectory<T>) -> T {
    let pts = traj.points();
    let (num, den) = weights(traj)
        .enumerate()
        .fold((T::zero(), T::zero()), |(n, d), (v, w)| {
            let diff = if v == 0 { T::zero() } else { pts[v].1 - pts[v - 1].1 };
            (n + w * diff, d + w)
        });
    num / den
}

/// Fractions of visits at which BMI strictly rose / strictly fell, over V.
pub fn up_down_norm<T: Scalar>(traj: &Trajectory<T>) -> (T, T) {
    let pts = traj.points();
    let (up, down) = pts.windows(2).fold((0usize, 0usize), |(u, d), w| {
        if w[1].1 > w[0].1 {
            (u + 1, d)
        } else if w[1].1 < w[0].1 {
            (u, d + 1)
        } else {
            (u, d)
        }
    });
    let v = T::from_usize_lossy(pts.len());
    (T::from_usize_lossy(up) / v, T::from_usize_lossy(down) / v)
}

pub fn bmi_max<T: Scalar>(traj: &Trajectory<T>) -> T {
    traj.points()
        .iter()
        .map(|p| p.1)
        .fold(T::neg_infinity(), T::max)
}

/// Largest signed change between consecutive readings.
pub fn bmi_max_delta<T: Scalar>(traj: &Trajectory<T>) -> T {
    traj.points()
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(T::neg_infinity(), T::max)
}

pub fn bmi_category<T: Scalar>(bmi: T) -> Result<BmiCategory> {
    BmiCutoffs::default().classify(bmi)
}

pub fn start_end_categories<T: Scalar>(
    traj: &Trajectory<T>,
    cutoffs: &BmiCutoffs<T>,
) -> Result<(BmiCategory, BmiCategory)> {
    let pts = traj.points();
    Ok((
        cutoffs.classify(pts[0].1)?,
        cutoffs.classify(pts[pts.len() - 1].1)?,
    ))
}

pub fn median_bmi<T: Scalar>(traj: &Trajectory<T>) -> T {
    let mut xs = traj.bmi();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / T::lit(2.0)
    }
}

/// All nine features under the default CDC cutoffs.
pub fn extract_feature_vector<T: Scalar>(traj: &Trajectory<T>) -> Result<FeatureVector<T>> {
    extract_with_cutoffs(traj, &BmiCutoffs::default())
}

pub fn extract_with_cutoffs<T: Scalar>(
    traj: &Trajectory<T>,
    cutoffs: &BmiCutoffs<T>,
) -> Result<FeatureVector<T>> {
    let (up_norm, down_norm) = up_down_norm(traj);
    let (cat_start, cat_end) = start_end_categories(traj, cutoffs)?;
    Ok(FeatureVector {
        weighted_mean: weighted_mean(traj),
        trend: trend(traj),
        up_norm,
        down_norm,
        bmi_max: bmi_max(traj),
        bmi_max_delta: bmi_max_delta(traj),
        cat_start,
        cat_end,
        median: median_bmi(traj),
    })
}

/// One row of the features CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow<T: Scalar> {
    pub patient_id: String,
    pub features: FeatureVector<T>,
    pub label: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct CsvRow<T: Scalar> {
    patient_id: String,
    weighted_mean: T,
    trend: T,
    up_norm: T,
    down_norm: T,
    bmi_max: T,
    bmi_max_delta: T,
    cat_start: BmiCategory,
    cat_end: BmiCategory,
    median: T,
    label: u8,
}

pub fn write_features_csv<T: Scalar, W: std::io::Write>(rows: &[FeatureRow<T>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e| Error::Csv {
        path: "<features>".into(),
        source: e,
    };
    for r in rows {
        let f = &r.features;
        wtr.serialize(CsvRow {
            patient_id: r.patient_id.clone(),
            weighted_mean: f.weighted_mean,
            trend: f.trend,
            up_norm: f.up_norm,
            down_norm: f.down_norm,
            bmi_max: f.bmi_max,
            bmi_max_delta: f.bmi_max_delta,
            cat_start: f.cat_start,
            cat_end: f.cat_end,
            median: f.median,
            label: r.label,
        })
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

pub fn read_features_csv<T: Scalar>(path: &std::path::Path) -> Result<Vec<FeatureRow<T>>> {
    let err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    rdr.deserialize::<CsvRow<T>>()
        .map(|r| {
            let r = r.map_err(err)?;
            Ok(FeatureRow {
                patient_id: r.patient_id,
                label: r.label,
                features: FeatureVector {
                    weighted_mean: r.weighted_mean,
                    trend: r.trend,
                    up_norm: r.up_norm,
                    down_norm: r.down_norm,
                    bmi_max: r.bmi_max,
                    bmi_max_delta: r.bmi_max_delta,
                    cat_start: r.cat_start,
                    cat_end: r.cat_end,
                    median: r.median,
                },
            })
        })
        .collect()
}
