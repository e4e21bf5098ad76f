use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The 18 chronic-disease cohorts. Codes are the lower-case identifiers used in
/// the visits CSV `diagnoses` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Disease {
    Hypothyroidism,
    Stroke,
    AlzheimersDementia,
    Anemia,
    Asthma,
    AFib,
    Cardiac,
    Bph,
    Ckd,
    Copd,
    Cancer,
    Depression,
    Diabetes,
    HipFractureOsteoporosis,
    Hyperlipidemia,
    Hypertension,
    Obesity,
    Arthritis,
}

impl Disease {
    pub const ALL: [Disease; 18] = [
        Disease::Hypothyroidism,
        Disease::Stroke,
        Disease::AlzheimersDementia,
        Disease::Anemia,
        Disease::Asthma,
        Disease::AFib,
        Disease::Cardiac,
        Disease::Bph,
        Disease::Ckd,
        Disease::Copd,
        Disease::Cancer,
        Disease::Depression,
        Disease::Diabetes,
        Disease::HipFractureOsteoporosis,
        Disease::Hyperlipidemia,
        Disease::Hypertension,
        Disease::Obesity,
        Disease::Arthritis,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Disease::Hypothyroidism => "hypothyroidism",
            Disease::Stroke => "stroke",
            Disease::AlzheimersDementia => "alzheimers_dementia",
            Disease::Anemia => "anemia",
            Disease::Asthma => "asthma",
            Disease::AFib => "afib",
            Disease::Cardiac => "cardiac",
            Disease::Bph => "bph",
            Disease::Ckd => "ckd",
            Disease::Copd => "copd",
            Disease::Cancer => "cancer",
            Disease::Depression => "depression",
            Disease::Diabetes => "diabetes",
            Disease::HipFractureOsteoporosis => "hip_fracture_osteoporosis",
            Disease::Hyperlipidemia => "hyperlipidemia",
            Disease::Hypertension => "hypertension",
            Disease::Obesity => "obesity",
            Disease::Arthritis => "arthritis",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Disease::Hypothyroidism => "Hypothyroidism",
            Disease::Stroke => "Stroke",
            Disease::AlzheimersDementia => "Alzheimer's/Dementia",
            Disease::Anemia => "Anemia",
            Disease::Asthma => "Asthma",
            Disease::AFib => "AFib",
            Disease::Cardiac => "Cardiac",
            Disease::Bph => "BPH",
            Disease::Ckd => "CKD",
            Disease::Copd => "COPD",
            Disease::Cancer => "Cancer",
            Disease::Depression => "Depression",
            Disease::Diabetes => "Diabetes",
            Disease::HipFractureOsteoporosis => "Hip fracture/Osteoporosis",
            Disease::Hyperlipidemia => "Hyperlipidemia",
            Disease::Hypertension => "Hypertension",
            Disease::Obesity => "Obesity",
            Disease::Arthritis => "Arthritis",
        }
    }
}

impl fmt::Display for Disease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Disease {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Disease::ALL
            .iter()
            .copied()
            .find(|d| d.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownDisease(s.to_string()))
    }
}

impl Serialize for Disease {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Disease {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which patients count as positive in a cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CohortTarget {
    Disease(Disease),
    /// Patients labeled positive for at least one of the 18 diseases.
    AnyDisease,
}

impl CohortTarget {
    pub fn code(self) -> &'static str {
        match self {
            CohortTarget::Disease(d) => d.code(),
            CohortTarget::AnyDisease => "any_disease",
        }
    }
}

impl fmt::Display for CohortTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CohortTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("any_disease") {
            Ok(CohortTarget::AnyDisease)
        } else {
            s.parse().map(CohortTarget::Disease)
        }
    }
}

impl Serialize for CohortTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for CohortTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
