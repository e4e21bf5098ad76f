use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::disease::Disease;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.label().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::UnknownCategory {
                        field: $field,
                        value: s.to_string(),
                    })
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

categorical!(AgeGroup, "age_group" {
    Under30 => "<30",
    From30To39 => "30-39",
    From40To49 => "40-49",
    From50To59 => "50-59",
    From60To69 => "60-69",
    Over70 => "70+",
});

categorical!(Gender, "gender" {
    Male => "Male",
    Female => "Female",
});

categorical!(Race, "race" {
    White => "White",
    HispanicLatino => "Hispanic/Latino",
    Black => "Black or African American",
    Other => "Other",
});

categorical!(Insurance, "insurance" {
    Commercial => "Commercial",
    Medicaid => "Medicaid",
    Medicare => "Medicare",
    Other => "Other",
    SelfPay => "Self-pay",
});

categorical!(Residence, "residence" {
    Metro => "Metro",
    MetroAdjacent => "Metro-adjacent",
    Rural => "Rural",
});

categorical!(Income, "income" {
    High => "High",
    Low => "Low",
    Medium => "Medium",
});

/// Plausible lab-value ranges. Values outside are rejected at ingest.
pub const HBA1C_RANGE: (f64, f64) = (5.1, 11.7);
pub const SBP_RANGE: (f64, f64) = (98.0, 166.0);
pub const DBP_RANGE: (f64, f64) = (58.0, 100.0);
pub const LDL_RANGE: (f64, f64) = (44.0, 189.0);
pub const BMI_RANGE: (f64, f64) = (10.0, 100.0);

/// Optional physiological measurements taken at a visit (or averaged per patient).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Measurements<T: Scalar> {
    pub hba1c: Option<T>,
    pub sbp: Option<T>,
    pub dbp: Option<T>,
    pub ldl: Option<T>,
}

/// Names of the continuous lab variables, in report order.
pub const MEASUREMENT_NAMES: [&str; 4] = ["hba1c", "sbp", "dbp", "ldl"];

impl<T: Scalar> Measurements<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        match name {
            "hba1c" => self.hba1c,
            "sbp" => self.sbp,
            "dbp" => self.dbp,
            "ldl" => self.ldl,
            _ => None,
        }
    }

    /// Per-field mean of the available values.
    pub fn mean_of<'a>(items: impl IntoIterator<Item = &'a Measurements<T>> + Clone) -> Self {
        fn avg<T: Scalar>(vals: impl Iterator<Item = Option<T>>) -> Option<T> {
            let v: Vec<T> = vals.flatten().collect();
            crate::scalar::mean(&v)
        }
        Measurements {
            hba1c: avg(items.clone().into_iter().map(|m| m.hba1c)),
            sbp: avg(items.clone().into_iter().map(|m| m.sbp)),
            dbp: avg(items.clone().into_iter().map(|m| m.dbp)),
            ldl: avg(items.into_iter().map(|m| m.ldl)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord<T: Scalar> {
    pub patient_id: String,
    pub t_months: u32,
    pub bmi: T,
    pub diagnoses: BTreeSet<Disease>,
    pub measurements: Measurements<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientStatic {
    pub patient_id: String,
    pub age_group: AgeGroup,
    pub gender: Gender,
    pub race: Race,
    pub insurance: Insurance,
    pub residence: Residence,
    pub income: Income,
    pub prior_conditions: BTreeSet<Disease>,
}

/// Column names for the visits CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitSchema {
    pub patient_id: String,
    pub t_months: String,
    pub bmi: String,
    pub diagnoses: String,
    pub hba1c: String,
    pub sbp: String,
    pub dbp: String,
    pub ldl: String,
}

impl Default for VisitSchema {
    fn default() -> Self {
        VisitSchema {
            patient_id: "patient_id".into(),
            t_months: "t_months".into(),
            bmi: "bmi".into(),
            diagnoses: "diagnoses".into(),
            hba1c: "hba1c".into(),
            sbp: "sbp".into(),
            dbp: "dbp".into(),
            ldl: "ldl".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedVisits<T: Scalar> {
    pub records: Vec<VisitRecord<T>>,
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
}

#[derive(Debug, Clone)]
pub struct ParsedStatics {
    pub records: Vec<PatientStatic>,
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Header {
            path: path.to_path_buf(),
            expected: name.to_string(),
        })
}

fn parse_diseases(s: &str) -> Result<BTreeSet<Disease>> {
    s.split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_real<T: Scalar>(
    raw: &str,
    row: usize,
    field: &'static str,
    range: (f64, f64),
) -> Result<T> {
    let v: f64 = raw.parse().map_err(|_| Error::Malformed {
        row,
        field,
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Malformed {
            row,
            field,
            value: raw.to_string(),
        });
    }
    if v < range.0 || v > range.1 {
        return Err(Error::OutOfRange {
            row,
            field,
            value: v,
            lo: range.0,
            hi: range.1,
        });
    }
    Ok(T::lit(v))
}

fn parse_optional<T: Scalar>(
    raw: Option<&str>,
    row: usize,
    field: &'static str,
    range: (f64, f64),
) -> Result<Option<T>> {
    match raw {
        None | Some("") => Ok(None),
        Some(s) => parse_real(s, row, field, range).map(Some),
    }
}

/// Read visit-level records. Rows missing a patient id, month or BMI are
/// dropped and counted; malformed values are errors carrying the 1-based data
/// row number.
pub fn parse_visits<T: Scalar>(path: &Path, schema: &VisitSchema) -> Result<ParsedVisits<T>> {
    let mut rdr = open_csv(path)?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let c_id = column(&headers, &schema.patient_id, path)?;
    let c_t = column(&headers, &schema.t_months, path)?;
    let c_bmi = column(&headers, &schema.bmi, path)?;
    let c_dx = column(&headers, &schema.diagnoses, path)?;
    // lab columns are optional in the header as well
    let opt_col = |name: &str| headers.iter().position(|h| h == name);
    let c_hba1c = opt_col(&schema.hba1c);
    let c_sbp = opt_col(&schema.sbp);
    let c_dbp = opt_col(&schema.dbp);
    let c_ldl = opt_col(&schema.ldl);

    let mut out = ParsedVisits {
        records: Vec::new(),
        rows_read: 0,
        rows_dropped_missing: 0,
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        out.rows_read += 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let (id, t_raw, bmi_raw) = (field(c_id), field(c_t), field(c_bmi));
        if id.is_empty() || t_raw.is_empty() || bmi_raw.is_empty() {
            out.rows_dropped_missing += 1;
            continue;
        }
        let t_months: u32 = t_raw.parse().map_err(|_| Error::Malformed {
            row,
            field: "t_months",
            value: t_raw.to_string(),
        })?;
        let bmi = parse_real(bmi_raw, row, "bmi", BMI_RANGE)?;
        let diagnoses = parse_diseases(field(c_dx))?;
        let get = |c: Option<usize>| c.map(field);
        let measurements = Measurements {
            hba1c: parse_optional(get(c_hba1c), row, "hba1c", HBA1C_RANGE)?,
            sbp: parse_optional(get(c_sbp), row, "sbp", SBP_RANGE)?,
            dbp: parse_optional(get(c_dbp), row, "dbp", DBP_RANGE)?,
            ldl: parse_optional(get(c_ldl), row, "ldl", LDL_RANGE)?,
        };
        out.records.push(VisitRecord {
            patient_id: id.to_string(),
            t_months,
            bmi,
            diagnoses,
            measurements,
        });
    }
    Ok(out)
}

pub const STATICS_COLUMNS: [&str; 8] = [
    "patient_id",
    "age_group",
    "gender",
    "race",
    "insurance",
    "residence",
    "income",
    "prior_conditions",
];

pub fn parse_statics(path: &Path) -> Result<ParsedStatics> {
    let mut rdr = open_csv(path)?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let cols = STATICS_COLUMNS
        .iter()
        .map(|c| column(&headers, c, path))
        .collect::<Result<Vec<_>>>()?;

    let mut out = ParsedStatics {
        records: Vec::new(),
        rows_read: 0,
        rows_dropped_missing: 0,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        out.rows_read += 1;
        let f: Vec<&str> = cols.iter().map(|&c| rec.get(c).unwrap_or("")).collect();
        // prior_conditions may legitimately be empty
        if f[..7].iter().any(|v| v.is_empty()) {
            out.rows_dropped_missing += 1;
            continue;
        }
        out.records.push(PatientStatic {
            patient_id: f[0].to_string(),
            age_group: f[1].parse()?,
            gender: f[2].parse()?,
            race: f[3].parse()?,
            insurance: f[4].parse()?,
            residence: f[5].parse()?,
            income: f[6].parse()?,
            prior_conditions: parse_diseases(f[7])?,
        });
    }
    Ok(out)
}

fn join_diseases(set: &BTreeSet<Disease>) -> String {
    set.iter().map(|d| d.code()).collect::<Vec<_>>().join(";")
}

fn opt_str<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_visits_csv<T: Scalar, W: Write>(visits: &[VisitRecord<T>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Csv {
        path: "<visits>".into(),
        source: e,
    };
    wtr.write_record([
        "patient_id",
        "t_months",
        "bmi",
        "diagnoses",
        "hba1c",
        "sbp",
        "dbp",
        "ldl",
    ])
    .map_err(io)?;
    for v in visits {
        wtr.write_record([
            v.patient_id.clone(),
            v.t_months.to_string(),
            v.bmi.to_string(),
            join_diseases(&v.diagnoses),
            opt_str(v.measurements.hba1c),
            opt_str(v.measurements.sbp),
            opt_str(v.measurements.dbp),
            opt_str(v.measurements.ldl),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<visits>", e))?;
    Ok(())
}

pub fn write_statics_csv<W: Write>(statics: &[PatientStatic], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Csv {
        path: "<statics>".into(),
        source: e,
    };
    wtr.write_record(STATICS_COLUMNS).map_err(io)?;
    for s in statics {
        wtr.write_record([
            s.patient_id.as_str(),
            s.age_group.label(),
            s.gender.label(),
            s.race.label(),
            s.insurance.label(),
            s.residence.label(),
            s.income.label(),
            &join_diseases(&s.prior_conditions),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<statics>", e))?;
    Ok(())
}
