//! Standardization, k-means, validity scores, elbow selection, agglomerative
//! comparison and the 2-D principal-component export.

mod agglomerative;
mod elbow;
mod kmeans;
pub mod metrics;
mod pca;
mod standardize;
mod validity;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use agglomerative::{agglomerative_fit, Linkage};
pub use elbow::{chord_knee, elbow_seed, elbow_select, elbow_select_with, ElbowPoint, ElbowResult, MIN_KNEE_STRENGTH};
pub use kmeans::{kmeans_fit, kmeans_plus_plus, lloyd, KMeansConfig, KMeansFit};
pub use metrics::{adjusted_rand_index, centroids_of, inertia_of};
pub use pca::{pca_project, PcaProjection};
pub use standardize::{feature_matrix, standardize, standardize_matrix, Scaler, StandardizedMatrix};
pub use validity::{calinski_harabasz, silhouette};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterMethod {
    KMeans,
    Agglomerative(Linkage),
}

impl ClusterMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::Agglomerative(l) => l.name(),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("kmeans") {
            Ok(ClusterMethod::KMeans)
        } else {
            s.parse().map(ClusterMethod::Agglomerative)
        }
    }
}

impl Serialize for ClusterMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClusterMethod {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A fitted clustering in standardized feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T: Scalar> {
    pub method: ClusterMethod,
    pub k: usize,
    pub centroids: Matrix<T>,
    pub assignments: Vec<usize>,
    pub inertia: T,
    pub n_iter: usize,
    pub seed: u64,
    pub silhouette: T,
    /// `+inf` for a perfect (zero within-cluster spread) clustering.
    pub calinski_harabasz: T,
}

/// Fit `k` clusters with the chosen method and score them.
pub fn fit_model<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    method: ClusterMethod,
    seed: u64,
) -> Result<ClusterModel<T>> {
    let (centroids, assignments, inertia, n_iter) = match method {
        ClusterMethod::KMeans => {
            let fit = kmeans_fit(x, &KMeansConfig::new(k, seed))?;
            (fit.centroids, fit.assignments, fit.inertia, fit.n_iter)
        }
        ClusterMethod::Agglomerative(linkage) => {
            if k < 2 {
                return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
            }
            let labels = agglomerative_fit(x, k, linkage)?;
            let c = centroids_of(x, &labels, k);
            let inertia = inertia_of(x, &labels, k);
            (c, labels, inertia, x.rows() - k)
        }
    };
    let silhouette = silhouette(x, &assignments)?;
    let calinski_harabasz = if k < x.rows() {
        calinski_harabasz(x, &assignments)?
    } else {
        T::nan()
    };
    Ok(ClusterModel {
        method,
        k,
        centroids,
        assignments,
        inertia,
        n_iter,
        seed,
        silhouette,
        calinski_harabasz,
    })
}

/// Serializable view of a [`ClusterModel`] with centroids in both standardized
/// and feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelReport<T: Scalar> {
    pub method: ClusterMethod,
    pub k: usize,
    pub seed: u64,
    pub inertia: T,
    pub n_iter: usize,
    pub silhouette: T,
    /// `None` when the score is infinite or undefined; see the flag.
    pub calinski_harabasz: Option<T>,
    pub calinski_harabasz_infinite: bool,
    pub cluster_sizes: Vec<usize>,
    pub feature_names: Vec<String>,
    pub centroids_standardized: Vec<Vec<T>>,
    pub centroids_features: Vec<Vec<T>>,
    pub scaler: Scaler<T>,
    pub elbow: Option<ElbowResult<T>>,
}

impl<T: Scalar> ModelReport<T> {
    pub fn new(model: &ClusterModel<T>, scaler: &Scaler<T>, elbow: Option<ElbowResult<T>>) -> Self {
        let mut sizes = vec![0usize; model.k];
        for &a in &model.assignments {
            sizes[a] += 1;
        }
        let ch = model.calinski_harabasz;
        ModelReport {
            method: model.method,
            k: model.k,
            seed: model.seed,
            inertia: model.inertia,
            n_iter: model.n_iter,
            silhouette: model.silhouette,
            calinski_harabasz: ch.is_finite().then_some(ch),
            calinski_harabasz_infinite: ch.is_infinite(),
            cluster_sizes: sizes,
            feature_names: crate::features::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            centroids_standardized: model.centroids.iter_rows().map(<[T]>::to_vec).collect(),
            centroids_features: model.centroids.iter_rows().map(|r| scaler.inverse_row(r)).collect(),
            scaler: scaler.clone(),
            elbow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub patient_id: String,
    pub cluster_id: usize,
    pub label: u8,
}

pub fn write_assignments_csv<W: Write>(rows: &[AssignmentRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Csv {
            path: "<assignments>".into(),
            source: e,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<assignments>", e))?;
    Ok(())
}

pub fn read_assignments_csv(path: &std::path::Path) -> Result<Vec<AssignmentRow>> {
    let err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProjectionRow<T: Scalar> {
    pub patient_id: String,
    pub pc1: T,
    pub pc2: T,
    pub cluster_id: usize,
    pub label: u8,
}

pub fn write_projection_csv<T: Scalar, W: Write>(rows: &[ProjectionRow<T>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Csv {
            path: "<projection>".into(),
            source: e,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<projection>", e))?;
    Ok(())
}
