use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::disease::{CohortTarget, Disease};
use super::records::{Measurements, PatientStatic, VisitRecord};
use super::trajectory::Trajectory;
use crate::rng::rng_from;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CohortMember<T: Scalar> {
    pub patient_id: String,
    pub label: u8,
    pub trajectory: Trajectory<T>,
    #[serde(rename = "static")]
    pub static_info: PatientStatic,
    pub mean_measurements: Measurements<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Cohort<T: Scalar> {
    pub target: CohortTarget,
    pub balanced: bool,
    pub members: Vec<CohortMember<T>>,
}

impl<T: Scalar> Cohort<T> {
    pub fn n_positive(&self) -> usize {
        self.members.iter().filter(|m| m.label == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.members.len() - self.n_positive()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.members.iter().map(|m| m.label).collect()
    }
}

/// 1 iff the diagnosis appears in strictly more than 75% of the visits.
pub fn label_disease<T: Scalar>(visits: &[&VisitRecord<T>], disease: Disease) -> u8 {
    let total = visits.len();
    let hits = visits.iter().filter(|v| v.diagnoses.contains(&disease)).count();
    // hits / total > 3/4 without floating point
    u8::from(total > 0 && 4 * hits > 3 * total)
}

/// Per-patient incidence labels for every disease in the catalog.
pub fn label_all<T: Scalar>(visits: &[&VisitRecord<T>]) -> BTreeSet<Disease> {
    Disease::ALL
        .iter()
        .copied()
        .filter(|&d| label_disease(visits, d) == 1)
        .collect()
}

/// Assemble a cohort: all positives plus an equal-size uniform sample (without
/// replacement) of patients positive for none of the 18 diseases. Patients
/// lacking a trajectory or a static record are not eligible. When there are too
/// few healthy patients every one of them is used and the cohort is flagged
/// unbalanced.
pub fn build_cohort<T: Scalar>(
    trajectories: &[Trajectory<T>],
    statics: &[PatientStatic],
    visits: &[VisitRecord<T>],
    target: CohortTarget,
    seed: u64,
) -> Cohort<T> {
    let mut visits_by: BTreeMap<&str, Vec<&VisitRecord<T>>> = BTreeMap::new();
    for v in visits {
        visits_by.entry(v.patient_id.as_str()).or_default().push(v);
    }
    let statics_by: BTreeMap<&str, &PatientStatic> =
        statics.iter().map(|s| (s.patient_id.as_str(), s)).collect();
    let mut trajs: Vec<&Trajectory<T>> = trajectories.iter().collect();
    trajs.sort_by(|a, b| a.patient_id().cmp(b.patient_id()));

    let mut positives = Vec::new();
    let mut healthy = Vec::new();
    for traj in trajs {
        let id = traj.patient_id();
        let (Some(pv), Some(st)) = (visits_by.get(id), statics_by.get(id)) else {
            continue;
        };
        let labels = label_all(pv);
        let positive = match target {
            CohortTarget::Disease(d) => labels.contains(&d),
            CohortTarget::AnyDisease => !labels.is_empty(),
        };
        let member = CohortMember {
            patient_id: id.to_string(),
            label: u8::from(positive),
            trajectory: traj.clone(),
            static_info: (*st).clone(),
            mean_measurements: Measurements::mean_of(pv.iter().map(|v| &v.measurements)),
        };
        if positive {
            positives.push(member);
        } else if labels.is_empty() {
            healthy.push(member);
        }
    }

    let want = positives.len();
    let balanced = healthy.len() >= want;
    let mut controls: Vec<CohortMember<T>> = if balanced {
        let mut rng = rng_from(seed);
        let mut picked = sample(&mut rng, healthy.len(), want).into_vec();
        picked.sort_unstable();
        let mut slots: Vec<Option<CohortMember<T>>> = healthy.into_iter().map(Some).collect();
        picked.into_iter().map(|i| slots[i].take().unwrap()).collect()
    } else {
        healthy
    };

    let mut members = positives;
    members.append(&mut controls);
    Cohort {
        target,
        balanced,
        members,
    }
}
