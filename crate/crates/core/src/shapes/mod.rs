//! Per-cluster representative BMI shapes: k-shape centroids of equal-length
//! groups, then DTW barycenter averaging across groups.

mod dba;
mod dtw;
mod sbd;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dba::{dba_mean, dba_mean_weighted, resample, DbaResult, DBA_MAX_ITER};
pub use dtw::{dtw_distance, dtw_path};
pub use sbd::{circular_shift, kshape_unify, sbd_distance, sbd_distance_with, znormalize};

use crate::error::{Error, Result};
use crate::ingest::Trajectory;
use crate::scalar::Scalar;

pub const TARGET_LEN_MIN: usize = 4;
pub const TARGET_LEN_MAX: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeOptions {
    /// Fixed representative length; default is the median member length
    /// clamped to `[TARGET_LEN_MIN, TARGET_LEN_MAX]`.
    pub target_len: Option<usize>,
    /// Weight each length group's shape by its member count when averaging.
    pub weight_by_group_size: bool,
    pub max_iter: usize,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions {
            target_len: None,
            weight_by_group_size: true,
            max_iter: DBA_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroupShape<T: Scalar> {
    pub length: usize,
    pub n_members: usize,
    pub shape: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ShapeSummary<T: Scalar> {
    pub cluster_id: usize,
    pub n_members: usize,
    /// Representative in BMI units: `bmi_mean + bmi_sd * representative`.
    pub representative_bmi: Vec<T>,
    /// Member count per trajectory length.
    pub lengths_histogram: BTreeMap<usize, usize>,
    /// Z-normalized representative shape.
    pub representative: Vec<T>,
    pub bmi_mean: T,
    pub bmi_sd: T,
    pub target_len: usize,
    pub group_shapes: Vec<GroupShape<T>>,
    pub dba_objective_trace: Vec<T>,
}

/// Median of the member lengths (lower middle for even counts), clamped.
pub fn default_target_len(lengths: &[usize]) -> usize {
    let mut l = lengths.to_vec();
    l.sort_unstable();
    let med = if l.is_empty() { TARGET_LEN_MIN } else { l[(l.len() - 1) / 2] };
    med.clamp(TARGET_LEN_MIN, TARGET_LEN_MAX)
}

/// Representative shape of one cluster. Members are processed in patient-id
/// order, so the result does not depend on the order they are passed in.
pub fn cluster_shape_summary<T: Scalar>(
    cluster_id: usize,
    members: &[&Trajectory<T>],
    opts: &ShapeOptions,
) -> Result<ShapeSummary<T>> {
    if members.is_empty() {
        return Err(Error::InsufficientData(format!("cluster {cluster_id} has no members")));
    }
    let mut sorted: Vec<&Trajectory<T>> = members.to_vec();
    sorted.sort_by(|a, b| a.patient_id().cmp(b.patient_id()));

    let mut groups: BTreeMap<usize, Vec<Vec<T>>> = BTreeMap::new();
    for t in &sorted {
        groups.entry(t.len()).or_default().push(t.bmi());
    }
    let lengths: Vec<usize> = sorted.iter().map(|t| t.len()).collect();
    let target_len = opts.target_len.unwrap_or_else(|| default_target_len(&lengths));
    if target_len < 2 {
        return Err(Error::InvalidArgument("target length must be >= 2".into()));
    }

    let group_shapes: Vec<GroupShape<T>> = groups
        .iter()
        .map(|(&length, seqs)| {
            Ok(GroupShape {
                length,
                n_members: seqs.len(),
                shape: kshape_unify(seqs)?,
            })
        })
        .collect::<Result<_>>()?;

    let shapes: Vec<Vec<T>> = group_shapes.iter().map(|g| g.shape.clone()).collect();
    let weights: Vec<T> = group_shapes
        .iter()
        .map(|g| {
            if opts.weight_by_group_size {
                T::from_usize_lossy(g.n_members)
            } else {
                T::one()
            }
        })
        .collect();
    let dba = dba_mean_weighted(&shapes, &weights, target_len, opts.max_iter)?;
    let representative = znormalize(&dba.mean);

    let all: Vec<T> = sorted.iter().flat_map(|t| t.bmi()).collect();
    let nf = T::from_usize_lossy(all.len());
    let bmi_mean = all.iter().copied().sum::<T>() / nf;
    let bmi_sd = (all.iter().map(|&x| (x - bmi_mean) * (x - bmi_mean)).sum::<T>() / nf).sqrt();
    let representative_bmi = representative.iter().map(|&z| bmi_mean + bmi_sd * z).collect();

    Ok(ShapeSummary {
        cluster_id,
        n_members: sorted.len(),
        representative_bmi,
        lengths_histogram: groups.iter().map(|(&l, s)| (l, s.len())).collect(),
        representative,
        bmi_mean,
        bmi_sd,
        target_len,
        group_shapes,
        dba_objective_trace: dba.objective_trace,
    })
}

/// Summaries for clusters `0..k`, computed in parallel. Empty clusters are
/// skipped.
pub fn shape_summaries<T: Scalar>(
    trajectories: &[&Trajectory<T>],
    assignments: &[usize],
    k: usize,
    opts: &ShapeOptions,
) -> Result<Vec<ShapeSummary<T>>> {
    if trajectories.len() != assignments.len() {
        return Err(Error::Dimension {
            expected: trajectories.len(),
            got: assignments.len(),
        });
    }
    let mut by_cluster: Vec<Vec<&Trajectory<T>>> = vec![Vec::new(); k];
    for (t, &a) in trajectories.iter().zip(assignments) {
        if a >= k {
            return Err(Error::InvalidArgument(format!("cluster id {a} out of range for k = {k}")));
        }
        by_cluster[a].push(t);
    }
    by_cluster
        .par_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, m)| cluster_shape_summary(c, m, opts))
        .collect()
}
