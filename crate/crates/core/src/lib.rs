//! Patient subtyping from irregular BMI trajectories.
//!
//! The crate builds disease cohorts from visit records, extracts nine
//! engineered trajectory features, clusters cohorts with validated k-means,
//! summarizes each cluster's BMI shape with k-shape and DTW barycenter
//! averaging, and reports per-cluster disparities and relative risks.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the pipeline uses.

pub mod cluster;
pub mod error;
pub mod features;
pub mod ingest;
mod linalg;
pub mod matrix;
pub mod pipeline;
pub mod relevance;
pub mod rng;
pub mod scalar;
pub mod shapes;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Trajectory64 = ingest::Trajectory<f64>;
pub type Trajectory32 = ingest::Trajectory<f32>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type Cohort64 = ingest::Cohort<f64>;
pub type Matrix64 = Matrix<f64>;
pub type ClusterModel64 = cluster::ClusterModel<f64>;
pub type ShapeSummary64 = shapes::ShapeSummary<f64>;
pub type DisparityReport64 = stats::DisparityReport<f64>;
