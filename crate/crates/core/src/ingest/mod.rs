//! Record parsing, inclusion rules, cohort assembly and synthetic data.

mod cohort;
mod disease;
pub mod records;
pub mod synth;
mod trajectory;

pub use cohort::{build_cohort, label_all, label_disease, Cohort, CohortMember};
pub use disease::{CohortTarget, Disease};
pub use records::{
    parse_statics, parse_visits, write_statics_csv, write_visits_csv, AgeGroup, Gender, Income,
    Insurance, Measurements, ParsedStatics, ParsedVisits, PatientStatic, Race, Residence,
    VisitRecord, VisitSchema,
};
pub use trajectory::{build_trajectories, Trajectory, TrajectorySet};

use serde::{Deserialize, Serialize};

/// Counts surfaced by the ingest stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
    pub patients_excluded_single_visit: usize,
}
