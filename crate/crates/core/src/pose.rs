//! Dominant-plane detection and posture correction.
//!
//! RANSAC finds the ground plane, a least-squares pass refines it, and a
//! Rodrigues rotation maps its normal onto +Z before the plane is shifted to
//! z = 0.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point3, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),
    #[error("vector is not unit length (norm {0})")]
    NotUnitVector(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Plane `a·x + b·y + c·z + d = 0` with `(a, b, c)` of unit length, `c >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub unit_normal: Point3,
    pub inlier_indices: Vec<usize>,
    pub rms_residual: f64,
    /// Inlier threshold the model was fitted with.
    pub threshold: f64,
}

impl PlaneModel {
    fn from_normal(n: Point3, d: f64) -> Self {
        PlaneModel {
            a: n.x,
            b: n.y,
            c: n.z,
            d,
            unit_normal: n,
            inlier_indices: Vec::new(),
            rms_residual: 0.0,
            threshold: 0.0,
        }
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Angle between this plane's normal and `other`, radians.
    pub fn angle_to(&self, other: &Point3) -> f64 {
        let n = self.unit_normal;
        n.cross(other).norm().atan2(n.dot(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacParams {
    pub distance_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub min_inlier_fraction: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams { distance_threshold: 0.01, max_iterations: 1000, seed: 0, min_inlier_fraction: 0.15 }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), PoseError> {
        if !(self.distance_threshold > 0.0 && self.distance_threshold.is_finite()) {
            return Err(PoseError::InvalidParameter("distance_threshold must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(PoseError::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err(PoseError::InvalidParameter("min_inlier_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Row-major 3×3 rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationMatrix {
    pub m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Rotation by `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: Point3, angle: f64) -> Self {
        let k = axis / axis.norm();
        rodrigues(k, angle.sin(), angle.cos())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let m = &self.m;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[j][i];
            }
        }
        RotationMatrix { m: t }
    }

    pub fn mul(&self, o: &RotationMatrix) -> Self {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        RotationMatrix { m: r }
    }

    pub fn determinant(&self) -> f64 {
        self.to_matrix().determinant()
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut e: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                e = e.max((p.m[i][j] - want).abs());
            }
        }
        e
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j])
    }
}

fn rodrigues(k: Point3, s: f64, c: f64) -> RotationMatrix {
    // R = I + sinθ·K + (1 − cosθ)·K², K the cross-product matrix of k.
    let kx = [[0.0, -k.z, k.y], [k.z, 0.0, -k.x], [-k.y, k.x, 0.0]];
    let mut m = RotationMatrix::IDENTITY.m;
    for i in 0..3 {
        for j in 0..3 {
            let k2: f64 = (0..3).map(|t| kx[i][t] * kx[t][j]).sum();
            m[i][j] += s * kx[i][j] + (1.0 - c) * k2;
        }
    }
    RotationMatrix { m }
}

/// Rotation taking the unit vector `v` onto +Z.
pub fn rotation_to_up(v: Point3) -> Result<RotationMatrix, PoseError> {
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(PoseError::NotUnitVector(n));
    }
    let v = v / n;
    let w = v.cross(&Point3::new(0.0, 0.0, 1.0));
    let s = w.norm();
    if s < 1e-15 {
        return Ok(if v.z > 0.0 {
            RotationMatrix::IDENTITY
        } else {
            RotationMatrix { m: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]] }
        });
    }
    Ok(rodrigues(w / s, s, v.z))
}

fn plane_through(p: &Point3, q: &Point3, r: &Point3) -> Option<(Point3, f64)> {
    let n = (*q - *p).cross(&(*r - *p));
    let len = n.norm();
    let scale = (*q - *p).norm() * (*r - *p).norm();
    if !(len > 1e-10 * scale) || len == 0.0 {
        return None;
    }
    let n = n / len;
    Some((n, -n.dot(p)))
}

fn count_inliers(pts: &[Point3], n: &Point3, d: f64, thr: f64) -> usize {
    pts.iter().filter(|p| (n.dot(p) + d).abs() <= thr).count()
}

/// Least-squares plane through `idx`: centroid plus the covariance
/// eigenvector of the smallest eigenvalue.
fn least_squares_plane(pts: &[Point3], idx: &[usize]) -> Option<(Point3, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let inv = 1.0 / idx.len() as f64;
    let c = idx.iter().fold(Point3::ORIGIN, |s, &i| s + pts[i]) * inv;
    let mut cov = Matrix3::<f64>::zeros();
    for &i in idx {
        let q = pts[i] - c;
        let v = nalgebra::Vector3::new(q.x, q.y, q.z);
        cov += v * v.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let e = eig.eigenvectors.column(k);
    let n = Point3::new(e[0], e[1], e[2]);
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    let n = n / len;
    Some((n, -n.dot(&c)))
}

/// RANSAC over 3-point samples, then a least-squares refit on the winning
/// inlier set. The returned inliers are those of the refined plane.
pub fn ransac_plane(cloud: &PointCloud, params: &RansacParams) -> Result<PlaneModel, PoseError> {
    params.validate()?;
    let pts = cloud.points();
    let n = pts.len();
    if n < 3 {
        return Err(PoseError::DegenerateCloud(format!("{n} points, need at least 3")));
    }
    let thr = params.distance_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Point3, f64, usize)> = None;
    for _ in 0..params.max_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for m in [i.min(j), i.max(j)] {
            if k >= m {
                k += 1;
            }
        }
        let Some((nrm, d)) = plane_through(&pts[i], &pts[j], &pts[k]) else {
            continue;
        };
        let count = count_inliers(pts, &nrm, d, thr);
        if best.is_none_or(|b| count > b.2) {
            best = Some((nrm, d, count));
        }
    }
    let Some((nrm, d, count)) = best else {
        return Err(PoseError::DegenerateCloud("every sample was collinear".into()));
    };
    let need = params.min_inlier_fraction * n as f64;
    if (count as f64) < need {
        return Err(PoseError::DegenerateCloud(format!(
            "best plane has {count} inliers, fewer than {:.0} required",
            need.ceil()
        )));
    }

    let inliers_of = |nrm: &Point3, d: f64| -> Vec<usize> {
        (0..n).filter(|&i| (nrm.dot(&pts[i]) + d).abs() <= thr).collect()
    };
    let coarse = inliers_of(&nrm, d);
    let (mut nrm, mut d) = least_squares_plane(pts, &coarse).unwrap_or((nrm, d));
    if nrm.z < 0.0 {
        nrm = nrm * -1.0;
        d = -d;
    }
    let mut inliers = inliers_of(&nrm, d);
    if inliers.len() < 3 {
        inliers = coarse;
    }
    let ss: f64 = inliers.iter().map(|&i| (nrm.dot(&pts[i]) + d).powi(2)).sum();
    let mut plane = PlaneModel::from_normal(nrm, d);
    plane.rms_residual = (ss / inliers.len() as f64).sqrt();
    plane.inlier_indices = inliers;
    plane.threshold = thr;
    Ok(plane)
}

/// Rotates the cloud so the plane normal points along +Z, then shifts by
/// `+d` so the plane lands on z = 0.
pub fn correct_posture(cloud: &PointCloud, plane: &PlaneModel) -> Result<PointCloud, PoseError> {
    let r = rotation_to_up(plane.unit_normal)?;
    let shift = Point3::new(0.0, 0.0, plane.d);
    Ok(cloud.map(|p| r.apply(p) + shift))
}
