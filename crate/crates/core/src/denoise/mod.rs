//! Noise removal: radius outlier rejection followed by HDBSCAN
//! largest-cluster extraction.

pub mod hdbscan;
mod radius;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;

pub use hdbscan::{hdbscan, hdbscan_with, MstAlgorithm, MstEdge};
pub use radius::{radius_inliers, radius_outlier_filter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenoiseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label count {labels} does not match cloud size {points}")]
    LabelMismatch { labels: usize, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiusFilterParams {
    pub r0: f64,
    pub n_min: usize,
}

impl Default for RadiusFilterParams {
    fn default() -> Self {
        RadiusFilterParams { r0: 0.02, n_min: 4 }
    }
}

impl RadiusFilterParams {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(DenoiseError::InvalidParameter(format!("r0 must be positive, got {}", self.r0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams { min_cluster_size: 50, min_samples: 10 }
    }
}

impl HdbscanParams {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        if self.min_cluster_size < 2 {
            return Err(DenoiseError::InvalidParameter(format!(
                "min_cluster_size must be at least 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.min_samples < 1 {
            return Err(DenoiseError::InvalidParameter("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-point cluster ids; `None` is noise. Ids run `0..cluster_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<Option<usize>>,
    pub cluster_count: usize,
}

impl ClusterLabels {
    pub const NOISE: Option<usize> = None;

    pub fn all_noise(n: usize) -> Self {
        ClusterLabels { labels: vec![None; n], cluster_count: 0 }
    }

    /// Renumbers arbitrary ids so cluster ids appear in order of their
    /// lowest-index member.
    pub fn canonical(raw: Vec<Option<usize>>) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .into_iter()
            .map(|l| {
                l.map(|id| {
                    let next = map.len();
                    *map.entry(id).or_insert(next)
                })
            })
            .collect();
        ClusterLabels { labels, cluster_count: map.len() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.cluster_count];
        for id in self.labels.iter().flatten() {
            s[*id] += 1;
        }
        s
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Points of the biggest cluster; the lowest id wins ties. All-noise input
/// gives an empty cloud.
pub fn largest_cluster(cloud: &PointCloud, labels: &ClusterLabels) -> Result<PointCloud, DenoiseError> {
    if labels.len() != cloud.len() {
        return Err(DenoiseError::LabelMismatch { labels: labels.len(), points: cloud.len() });
    }
    let sizes = labels.sizes();
    let Some(best) = (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))) else {
        return Ok(PointCloud::new());
    };
    let idx: Vec<usize> = (0..cloud.len()).filter(|&i| labels.labels[i] == Some(best)).collect();
    Ok(cloud.select(&idx))
}

/// Radius filter, then keep the dominant HDBSCAN cluster.
pub fn robust_filter(
    cloud: &PointCloud,
    rparams: &RadiusFilterParams,
    hparams: &HdbscanParams,
) -> Result<PointCloud, DenoiseError> {
    hparams.validate()?;
    let kept = radius_outlier_filter(cloud, rparams)?;
    if kept.is_empty() {
        return Ok(kept);
    }
    let labels = hdbscan(&kept, hparams)?;
    largest_cluster(&kept, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point3;

    fn line(n: usize) -> PointCloud {
        (0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect()
    }

    #[test]
    fn largest_picks_bigger_cluster() {
        let c = line(5);
        let l = ClusterLabels { labels: vec![Some(1), Some(0), Some(1), None, Some(1)], cluster_count: 2 };
        let out = largest_cluster(&c, &l).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.points()[0].x, 0.0);
    }

    #[test]
    fn largest_tie_goes_to_lower_id() {
        let c = line(4);
        let l = ClusterLabels { labels: vec![Some(1), Some(1), Some(0), Some(0)], cluster_count: 2 };
        let out = largest_cluster(&c, &l).unwrap();
        assert_eq!(out.points()[0].x, 2.0);
    }

    #[test]
    fn all_noise_gives_empty() {
        let c = line(3);
        assert!(largest_cluster(&c, &ClusterLabels::all_noise(3)).unwrap().is_empty());
    }

    #[test]
    fn mismatched_labels_rejected() {
        let c = line(3);
        assert!(matches!(
            largest_cluster(&c, &ClusterLabels::all_noise(2)),
            Err(DenoiseError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn canonical_orders_by_first_member() {
        let l = ClusterLabels::canonical(vec![Some(7), None, Some(3), Some(7)]);
        assert_eq!(l.labels, vec![Some(0), None, Some(1), Some(0)]);
        assert_eq!(l.cluster_count, 2);
    }

    #[test]
    fn robust_filter_on_empty() {
        let out = robust_filter(&PointCloud::new(), &RadiusFilterParams::default(), &HdbscanParams::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(HdbscanParams { min_cluster_size: 1, min_samples: 1 }.validate().is_err());
        assert!(RadiusFilterParams { r0: -1.0, n_min: 1 }.validate().is_err());
    }
}
