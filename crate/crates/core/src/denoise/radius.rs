use crate::cloud::PointCloud;
use crate::spatial::HashGrid;

use super::{DenoiseError, RadiusFilterParams};

/// Keeps points with at least `n_min` *other* points within distance `r0`.
///
/// Same answer as the all-pairs loop; the grid only limits which pairs are
/// examined.
pub fn radius_outlier_filter(cloud: &PointCloud, params: &RadiusFilterParams) -> Result<PointCloud, DenoiseError> {
    params.validate()?;
    Ok(cloud.select(&radius_inliers(cloud, params)))
}

/// Indices kept by [`radius_outlier_filter`], ascending.
pub fn radius_inliers(cloud: &PointCloud, params: &RadiusFilterParams) -> Vec<usize> {
    let pts = cloud.points();
    if params.n_min == 0 {
        return (0..pts.len()).collect();
    }
    let grid = HashGrid::new(pts, params.r0);
    let mut keep = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let mut n = 0usize;
        grid.for_each_candidate(p, |j| {
            if j != i && p.distance(&pts[j]) <= params.r0 {
                n += 1;
            }
            n < params.n_min
        });
        if n >= params.n_min {
            keep.push(i);
        }
    }
    keep
}
