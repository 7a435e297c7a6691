use std::collections::BTreeMap;

use crate::cloud::PointCloud;

use super::{Aggregator, CompensationFactor, Diagnostics, GridSpec, Method, VolumeError, VolumeEstimate};

/// `factor × element_area × Σz`. Unsigned mode clamps each height at 0.
pub fn column_volume_uniform(
    cloud: &PointCloud,
    element_area: f64,
    comp: CompensationFactor,
    signed: bool,
) -> Result<VolumeEstimate, VolumeError> {
    if !(element_area > 0.0 && element_area.is_finite()) {
        return Err(VolumeError::InvalidParameter(format!("element area must be positive, got {element_area}")));
    }
    let sum: f64 = if signed {
        cloud.iter().map(|p| p.z).sum()
    } else {
        cloud.iter().map(|p| p.z.max(0.0)).sum()
    };
    let mut params = BTreeMap::new();
    params.insert("element_area".to_string(), element_area);
    params.insert("signed".to_string(), if signed { 1.0 } else { 0.0 });
    Ok(VolumeEstimate {
        volume: comp.factor() * element_area * sum,
        method: Method::ColumnUniform,
        params,
        diagnostics: Diagnostics {
            point_count: cloud.len(),
            element_count: cloud.len(),
            compensation: comp.factor(),
            ground_margin: None,
        },
    })
}

/// Per-cell column heights over an XY grid. Heights below 0 count as 0.
pub fn column_volume_grid(cloud: &PointCloud, grid: &GridSpec, comp: CompensationFactor) -> Result<VolumeEstimate, VolumeError> {
    grid.validate()?;
    let cs = grid.cell_size;
    // (max z, sum z, count) per occupied cell
    let mut cells: BTreeMap<(i64, i64), (f64, f64, usize)> = BTreeMap::new();
    for p in cloud.iter() {
        let key = (
            ((p.x - grid.origin[0]) / cs).floor() as i64,
            ((p.y - grid.origin[1]) / cs).floor() as i64,
        );
        let e = cells.entry(key).or_insert((f64::NEG_INFINITY, 0.0, 0));
        e.0 = e.0.max(p.z);
        e.1 += p.z;
        e.2 += 1;
    }
    let total: f64 = cells
        .values()
        .map(|&(max, sum, n)| match grid.aggregator {
            Aggregator::Max => max,
            Aggregator::Mean => sum / n as f64,
        })
        .map(|h| h.max(0.0))
        .sum();
    let mut params = BTreeMap::new();
    params.insert("cell_size".to_string(), cs);
    params.insert(
        "aggregator_max".to_string(),
        if grid.aggregator == Aggregator::Max { 1.0 } else { 0.0 },
    );
    Ok(VolumeEstimate {
        volume: comp.factor() * cs * cs * total,
        method: Method::ColumnGrid,
        params,
        diagnostics: Diagnostics {
            point_count: cloud.len(),
            element_count: cells.len(),
            compensation: comp.factor(),
            ground_margin: None,
        },
    })
}
