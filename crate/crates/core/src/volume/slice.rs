use std::collections::BTreeMap;

use crate::cloud::PointCloud;

use super::hull2d::convex_hull_2d;
use super::{CompensationFactor, Diagnostics, Method, VolumeError, VolumeEstimate};

/// Layers of thickness `interval` stacked from z = 0; each contributes the
/// area of its points' XY convex hull times the interval. Heights below 0
/// are ignored, as are layers whose points span no area.
pub fn slice_volume(cloud: &PointCloud, interval: f64) -> Result<VolumeEstimate, VolumeError> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(VolumeError::InvalidParameter(format!("slice interval must be positive, got {interval}")));
    }
    let mut layers: BTreeMap<u64, Vec<[f64; 2]>> = BTreeMap::new();
    for p in cloud.iter().filter(|p| p.z >= 0.0) {
        layers.entry((p.z / interval).floor() as u64).or_default().push([p.x, p.y]);
    }
    let mut area_sum = 0.0;
    let mut used = 0;
    for pts in layers.values() {
        if pts.len() < 3 {
            continue;
        }
        if let Ok(h) = convex_hull_2d(pts) {
            area_sum += h.area;
            used += 1;
        }
    }
    let mut params = BTreeMap::new();
    params.insert("interval".to_string(), interval);
    Ok(VolumeEstimate {
        volume: area_sum * interval,
        method: Method::Slice,
        params,
        diagnostics: Diagnostics {
            point_count: cloud.len(),
            element_count: used,
            compensation: CompensationFactor::NONE.factor(),
            ground_margin: None,
        },
    })
}
