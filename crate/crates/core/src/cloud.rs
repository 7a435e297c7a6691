//! Point-cloud substrate: points, clouds, axis ranges and the simple
//! geometric filters every later stage builds on.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("operation requires a non-empty cloud")]
    EmptyCloud,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A point in meters. Construction through [`PointCloud`] guarantees finite
/// coordinates once data has passed the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    #[inline]
    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(&self, o: &Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Euclidean distance. Every neighbor predicate in the crate goes through
    /// this one expression so that accelerated and brute-force paths agree
    /// bit for bit.
    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Ordered collection of points; one point per row of the coordinate matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new() -> Self {
        PointCloud { points: Vec::new() }
    }

    pub fn from_points(points: Vec<Point3>) -> Self {
        PointCloud { points }
    }

    pub fn with_capacity(n: usize) -> Self {
        PointCloud { points: Vec::with_capacity(n) }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn push(&mut self, p: Point3) {
        self.points.push(p);
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    /// Points at the given indices, in the order given.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud::from_points(indices.iter().map(|&i| self.points[i]).collect())
    }

    /// Keeps points for which `keep` returns true; order preserved.
    pub fn filter<F: FnMut(&Point3) -> bool>(&self, mut keep: F) -> PointCloud {
        PointCloud::from_points(self.points.iter().copied().filter(|p| keep(p)).collect())
    }

    pub fn map<F: FnMut(&Point3) -> Point3>(&self, f: F) -> PointCloud {
        PointCloud::from_points(self.points.iter().map(f).collect())
    }

    pub fn translated(&self, offset: Point3) -> PointCloud {
        self.map(|p| *p + offset)
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Point3::ORIGIN, |acc, p| acc + *p);
        Some(sum / self.points.len() as f64)
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        PointCloud::from_points(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point3;
    type IntoIter = std::slice::Iter<'a, Point3>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Closed interval on one axis; `None` bounds are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub axis: Axis,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl AxisRange {
    pub fn new(axis: Axis, lo: Option<f64>, hi: Option<f64>) -> Result<Self, CloudError> {
        let r = AxisRange { axis, lo, hi };
        r.validate()?;
        Ok(r)
    }

    pub fn bounded(axis: Axis, lo: f64, hi: f64) -> Result<Self, CloudError> {
        Self::new(axis, Some(lo), Some(hi))
    }

    pub fn at_least(axis: Axis, lo: f64) -> Self {
        AxisRange { axis, lo: Some(lo), hi: None }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if self.lo.is_some_and(f64::is_nan) || self.hi.is_some_and(f64::is_nan) {
            return Err(CloudError::InvalidParameter("range bound is NaN".into()));
        }
        if let (Some(lo), Some(hi)) = (self.lo, self.hi) {
            if lo > hi {
                return Err(CloudError::InvalidParameter(format!(
                    "range on {:?} has lo {lo} > hi {hi}",
                    self.axis
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        let v = p.coord(self.axis);
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }
}

/// Keeps exactly the points lying inside every range (closed on both ends).
pub fn passthrough_filter(cloud: &PointCloud, ranges: &[AxisRange]) -> PointCloud {
    if ranges.is_empty() {
        return cloud.clone();
    }
    cloud.filter(|p| ranges.iter().all(|r| r.contains(p)))
}

/// Replaces the points of every occupied cube of side `voxel_size` with
/// their centroid. The grid is anchored at the cloud's min corner and output
/// order follows the first member of each voxel.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud, CloudError> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(CloudError::InvalidParameter(format!(
            "voxel_size must be positive and finite, got {voxel_size}"
        )));
    }
    if cloud.is_empty() {
        return Ok(PointCloud::new());
    }
    let bb = bounding_box(cloud)?;
    let key = |p: &Point3| -> (i64, i64, i64) {
        (
            ((p.x - bb.min.x) / voxel_size).floor() as i64,
            ((p.y - bb.min.y) / voxel_size).floor() as i64,
            ((p.z - bb.min.z) / voxel_size).floor() as i64,
        )
    };
    let mut slot: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut sums: Vec<(Point3, usize)> = Vec::new();
    for p in cloud {
        let k = key(p);
        let idx = *slot.entry(k).or_insert_with(|| {
            sums.push((Point3::ORIGIN, 0));
            sums.len() - 1
        });
        let s = &mut sums[idx];
        s.0 = s.0 + *p;
        s.1 += 1;
    }
    Ok(sums.into_iter().map(|(s, n)| s / n as f64).collect())
}

/// Tight componentwise bounds.
pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb, CloudError> {
    let first = *cloud.points().first().ok_or(CloudError::EmptyCloud)?;
    let mut min = first;
    let mut max = first;
    for p in cloud.iter().skip(1) {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        min.z = min.z.min(p.z);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
        max.z = max.z.max(p.z);
    }
    Ok(Aabb { min, max })
}
