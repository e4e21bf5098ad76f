use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::VisitRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One patient's BMI readings at strictly increasing elapsed months, starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Trajectory<T: Scalar> {
    patient_id: String,
    points: Vec<(u32, T)>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(patient_id: impl Into<String>, points: Vec<(u32, T)>) -> Result<Self> {
        let patient_id = patient_id.into();
        let fail = |reason: &str| Error::InvalidTrajectory {
            patient_id: patient_id.clone(),
            reason: reason.to_string(),
        };
        if points.len() < 2 {
            return Err(fail("fewer than two visits"));
        }
        if points[0].0 != 0 {
            return Err(fail("first visit must be at month 0"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(fail("months must be strictly increasing"));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(fail("non-finite BMI"));
        }
        Ok(Trajectory { patient_id, points })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn points(&self) -> &[(u32, T)] {
        &self.points
    }

    /// Number of visits V.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bmi(&self) -> Vec<T> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn months(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.0).collect()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Trajectory<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound = "")]
        struct Raw<T: Scalar> {
            patient_id: String,
            points: Vec<(u32, T)>,
        }
        let raw = Raw::<T>::deserialize(d)?;
        Trajectory::new(raw.patient_id, raw.points).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectorySet<T: Scalar> {
    /// Sorted by patient id.
    pub trajectories: Vec<Trajectory<T>>,
    pub patients_excluded_single_visit: usize,
}

/// Group visits per patient, merge same-month readings by mean BMI, rebase
/// months so the first visit is 0 and drop patients with fewer than two
/// distinct months.
pub fn build_trajectories<T: Scalar>(visits: &[VisitRecord<T>]) -> TrajectorySet<T> {
    let mut by_patient: BTreeMap<&str, BTreeMap<u32, Vec<T>>> = BTreeMap::new();
    for v in visits {
        by_patient
            .entry(v.patient_id.as_str())
            .or_default()
            .entry(v.t_months)
            .or_default()
            .push(v.bmi);
    }
    let mut out = TrajectorySet {
        trajectories: Vec::with_capacity(by_patient.len()),
        patients_excluded_single_visit: 0,
    };
    for (id, months) in by_patient {
        if months.len() < 2 {
            out.patients_excluded_single_visit += 1;
            continue;
        }
        let t0 = *months.keys().next().unwrap();
        let points = months
            .into_iter()
            .map(|(t, vals)| (t - t0, crate::scalar::mean(&vals).unwrap()))
            .collect();
        out.trajectories
            .push(Trajectory::new(id, points).expect("grouped months satisfy invariants"));
    }
    out
}
