//! Volume estimators: column integration over a uniform point footprint or
//! an XY grid, plus slice-hull and 3D convex-hull baselines.

mod column;
pub mod hull2d;
pub mod hull3d;
mod slice;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use column::{column_volume_grid, column_volume_uniform};
pub use hull2d::{convex_hull_2d, Polygon2};
pub use hull3d::{convex_hull_3d, hull3d_volume, Hull3};
pub use slice::slice_volume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ColumnUniform,
    ColumnGrid,
    Slice,
    Hull3d,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ColumnUniform => "column-uniform",
            Method::ColumnGrid => "column-grid",
            Method::Slice => "slice",
            Method::Hull3d => "hull3d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_size: f64,
    pub aggregator: Aggregator,
    /// XY anchor of cell (0, 0).
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(cell_size: f64, aggregator: Aggregator) -> Self {
        GridSpec { cell_size, aggregator, origin: [0.0, 0.0] }
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(VolumeError::InvalidParameter(format!("cell_size must be positive, got {}", self.cell_size)));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(VolumeError::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(())
    }
}

/// Multiplier applied to column volumes, restricted to (0.5, 2.0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CompensationFactor(f64);

impl CompensationFactor {
    pub const NONE: CompensationFactor = CompensationFactor(1.0);

    pub fn new(factor: f64) -> Result<Self, VolumeError> {
        if factor > 0.5 && factor < 2.0 {
            Ok(CompensationFactor(factor))
        } else {
            Err(VolumeError::InvalidParameter(format!("compensation factor {factor} outside (0.5, 2.0)")))
        }
    }

    pub fn factor(&self) -> f64 {
        self.0
    }
}

impl Default for CompensationFactor {
    fn default() -> Self {
        CompensationFactor::NONE
    }
}

impl TryFrom<f64> for CompensationFactor {
    type Error = VolumeError;
    fn try_from(v: f64) -> Result<Self, VolumeError> {
        CompensationFactor::new(v)
    }
}

impl From<CompensationFactor> for f64 {
    fn from(c: CompensationFactor) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub point_count: usize,
    /// Occupied cells, non-empty slices or hull faces.
    pub element_count: usize,
    pub compensation: f64,
    pub ground_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    pub diagnostics: Diagnostics,
}

/// Area of the ground element each point stands for.
pub fn footprint_area(scene_area: f64, count: usize) -> Result<f64, VolumeError> {
    if !(scene_area > 0.0 && scene_area.is_finite()) {
        return Err(VolumeError::InvalidParameter(format!("scene area must be positive, got {scene_area}")));
    }
    if count == 0 {
        return Err(VolumeError::InvalidParameter("point count must be positive".into()));
    }
    Ok(scene_area / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_areas() {
        assert!((footprint_area(1.3, 1300).unwrap() - 0.001).abs() < 1e-15);
        assert_eq!(footprint_area(2.6, 1).unwrap(), 2.6);
        assert!((footprint_area(5.2, 520_000).unwrap() - 1e-5).abs() < 1e-18);
        assert!(footprint_area(0.0, 10).is_err());
        assert!(footprint_area(1.0, 0).is_err());
    }

    #[test]
    fn compensation_bounds() {
        assert!(CompensationFactor::new(0.5).is_err());
        assert!(CompensationFactor::new(2.0).is_err());
        assert_eq!(CompensationFactor::new(1.1).unwrap().factor(), 1.1);
    }
}
