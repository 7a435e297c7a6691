//! Synthetic pile scenes with analytic ground-truth volumes.
//!
//! A scene is a rectangle of ground centered on the origin with one pile in
//! the middle, sampled on a jittered grid as a downward-looking depth sensor
//! would see it, plus Gaussian noise, sparse outliers and clutter placed
//! outside the rectangle. The whole scene may then be tilted about a
//! horizontal axis and moved rigidly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Axis, AxisRange, Point3, PointCloud};
use crate::pose::RotationMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

/// Number of angular harmonics in a height-field pile.
const HARMONICS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PileShape {
    Cone { r: f64, h: f64 },
    Frustum { r1: f64, r2: f64, h: f64 },
    /// Cap of height `h` cut from a sphere of radius `sphere_r`.
    SphericalCap { sphere_r: f64, h: f64 },
    /// Paraboloid of base radius `r` and apex `h`, modulated by a few
    /// seeded angular harmonics that integrate to zero.
    Heightfield { r: f64, h: f64, seed: u64 },
    /// Ring segment of radius `rc`, radial half-width `w`, half-angle
    /// `half_angle` (radians) and peak height `h`. Concave in plan view.
    Crescent { rc: f64, w: f64, h: f64, half_angle: f64 },
}

impl PileShape {
    pub fn name(&self) -> &'static str {
        match self {
            PileShape::Cone { .. } => "cone",
            PileShape::Frustum { .. } => "frustum",
            PileShape::SphericalCap { .. } => "spherical-cap",
            PileShape::Heightfield { .. } => "heightfield",
            PileShape::Crescent { .. } => "crescent",
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let ok = match *self {
            PileShape::Cone { r, h } => pos(r) && pos(h),
            PileShape::Frustum { r1, r2, h } => pos(r1) && pos(r2) && r2 < r1 && pos(h),
            PileShape::SphericalCap { sphere_r, h } => pos(sphere_r) && pos(h) && h <= sphere_r,
            PileShape::Heightfield { r, h, .. } => pos(r) && pos(h),
            PileShape::Crescent { rc, w, h, half_angle } => {
                pos(rc) && pos(w) && w <= rc && pos(h) && half_angle > 0.0 && half_angle <= PI
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidSpec(format!("bad {} dimensions", self.name())))
        }
    }

    /// Radius of the disk that contains the footprint.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            PileShape::Cone { r, .. } => r,
            PileShape::Frustum { r1, .. } => r1,
            PileShape::SphericalCap { sphere_r, h } => (h * (2.0 * sphere_r - h)).sqrt(),
            PileShape::Heightfield { r, .. } => r,
            PileShape::Crescent { rc, w, .. } => rc + w,
        }
    }

    pub fn max_height(&self) -> f64 {
        match *self {
            PileShape::Cone { h, .. }
            | PileShape::Frustum { h, .. }
            | PileShape::SphericalCap { h, .. }
            | PileShape::Crescent { h, .. } => h,
            // The modulation is bounded by 1 + Σ|a_k|.
            PileShape::Heightfield { h, seed, .. } => {
                h * (1.0 + heightfield_terms(seed).iter().map(|t| t.0.abs()).sum::<f64>())
            }
        }
    }

    pub fn true_volume(&self) -> f64 {
        match *self {
            PileShape::Cone { r, h } => PI * r * r * h / 3.0,
            PileShape::Frustum { r1, r2, h } => PI * h * (r1 * r1 + r1 * r2 + r2 * r2) / 3.0,
            PileShape::SphericalCap { sphere_r, h } => PI * h * h * (3.0 * sphere_r - h) / 3.0,
            PileShape::Heightfield { r, h, .. } => PI * h * r * r / 2.0,
            PileShape::Crescent { rc, w, h, half_angle } => h * rc * w * half_angle,
        }
    }

    /// Surface height above ground at `(x, y)` relative to the pile center.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let rho = x.hypot(y);
        match *self {
            PileShape::Cone { r, h } => (h * (1.0 - rho / r)).max(0.0),
            PileShape::Frustum { r1, r2, h } => {
                if rho <= r2 {
                    h
                } else {
                    (h * (r1 - rho) / (r1 - r2)).max(0.0)
                }
            }
            PileShape::SphericalCap { sphere_r, h } => {
                let s = sphere_r * sphere_r - rho * rho;
                if s <= 0.0 {
                    0.0
                } else {
                    (s.sqrt() - (sphere_r - h)).max(0.0)
                }
            }
            PileShape::Heightfield { r, h, seed } => {
                if rho >= r {
                    return 0.0;
                }
                let t = rho / r;
                let theta = y.atan2(x);
                let mut m = 1.0;
                for (k, (a, phi)) in heightfield_terms(seed).iter().enumerate() {
                    let k = (k + 1) as f64;
                    m += a * t.powf(k) * (k * theta + phi).cos();
                }
                (h * (1.0 - t * t) * m).max(0.0)
            }
            PileShape::Crescent { rc, w, h, half_angle } => {
                let theta = y.atan2(x);
                if theta.abs() > half_angle {
                    return 0.0;
                }
                let radial = (1.0 - (rho - rc).abs() / w).max(0.0);
                let c = (PI * theta / (2.0 * half_angle)).cos();
                h * radial * c * c
            }
        }
    }
}

/// Seeded `(a_k, φ_k)` for k = 1..=3 with `Σ|a_k| ≤ 0.6`.
fn heightfield_terms(seed: u64) -> [(f64, f64); HARMONICS] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4845_4947_4854);
    let mut t = [(0.0, 0.0); HARMONICS];
    for term in t.iter_mut() {
        *term = (rng.random_range(-0.2..=0.2), rng.random_range(0.0..2.0 * PI));
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClutterShape {
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
}

/// A blob of points, uniform inside its shape, in scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSpec {
    pub shape: ClutterShape,
    pub center: [f64; 3],
    pub points: usize,
}

impl ClutterSpec {
    /// Wall strip, pole blob and a small far pile, all at least 0.3 m
    /// outside a ground rectangle of half-extents `hx`, `hy`.
    pub fn standard_set(hx: f64, hy: f64) -> Vec<ClutterSpec> {
        vec![
            ClutterSpec {
                shape: ClutterShape::Box { size: [0.04, 1.8 * hy, 0.6] },
                center: [hx + 0.45, 0.0, 0.3],
                points: 2000,
            },
            ClutterSpec { shape: ClutterShape::Sphere { radius: 0.08 }, center: [-hx - 0.4, 0.5 * hy, 0.5], points: 400 },
            ClutterSpec { shape: ClutterShape::Sphere { radius: 0.12 }, center: [0.0, -hy - 0.5, 0.06], points: 600 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub pile: PileShape,
    /// Ground rectangle `[width_x, depth_y]`, centered on the origin.
    pub ground_extent: [f64; 2],
    /// Samples per square meter of ground.
    pub point_density: f64,
    pub noise_sigma: f64,
    pub tilt_deg: f64,
    /// Apply a seeded rigid translation after tilting.
    #[serde(default)]
    pub rigid_offset: bool,
    #[serde(default)]
    pub clutter: Vec<ClutterSpec>,
    /// Nominal count of sparse outliers above the ground; the realized count
    /// is drawn per seed from `[n/2, 3n/2]`.
    #[serde(default)]
    pub outliers: usize,
    /// Peak-to-peak amplitude of a triangle-wave height error on ground
    /// samples, meters.
    #[serde(default)]
    pub ground_smear: f64,
    pub seed: u64,
}

/// Triangle-wave period of the ground smear, meters.
const SMEAR_PERIOD: f64 = 0.2;

impl SceneSpec {
    /// A scene with the standard noise, tilt-free and clutter-free.
    pub fn new(pile: PileShape, ground_extent: [f64; 2], seed: u64) -> Self {
        SceneSpec {
            pile,
            ground_extent,
            point_density: 10_000.0,
            noise_sigma: 0.005,
            tilt_deg: 0.0,
            rigid_offset: false,
            clutter: Vec::new(),
            outliers: 0,
            ground_smear: 0.0,
            seed,
        }
    }

    pub fn footprint_area(&self) -> f64 {
        self.ground_extent[0] * self.ground_extent[1]
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SceneSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.pile.validate()?;
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        let [w, d] = self.ground_extent;
        if !(w > 0.0 && d > 0.0 && w.is_finite() && d.is_finite()) {
            return bad("ground extent must be positive");
        }
        let r = self.pile.footprint_radius();
        if 2.0 * r > w.min(d) {
            return bad("pile does not fit on the ground rectangle");
        }
        if !(self.point_density > 0.0 && self.point_density.is_finite()) {
            return bad("point density must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative");
        }
        if !(0.0..=30.0).contains(&self.tilt_deg) {
            return bad("tilt must lie in [0, 30] degrees");
        }
        if !(self.ground_smear >= 0.0 && self.ground_smear.is_finite()) {
            return bad("ground smear must be non-negative");
        }
        for c in &self.clutter {
            let ok = match c.shape {
                ClutterShape::Box { size } => size.iter().all(|&s| s > 0.0),
                ClutterShape::Sphere { radius } => radius > 0.0,
            };
            if !ok || !c.center.iter().all(|v| v.is_finite()) {
                return bad("clutter dimensions must be positive");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, SynthError> {
        let spec: SceneSpec = toml::from_str(s).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Applied as `p ↦ R·p + t` after sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Point3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform { rotation: RotationMatrix::IDENTITY, translation: Point3::ORIGIN };

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation.apply(p) + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub true_volume: f64,
    /// Ground height before the tilt and offset.
    pub true_ground_height: f64,
    pub spec: SceneSpec,
    pub transform: RigidTransform,
    /// Ground and pile samples come first in the cloud; this many of them.
    pub surface_count: usize,
}

impl Scene {
    /// Pass-through ranges that keep the ground rectangle and what stands on
    /// it while excluding the clutter.
    pub fn measurement_region(&self) -> Vec<AxisRange> {
        let [w, d] = self.spec.ground_extent;
        let (hx, hy) = (w / 2.0, d / 2.0);
        let top = self.spec.pile.max_height() + 1.0;
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y, z) in [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
            .iter()
            .flat_map(|&(x, y)| [(x, y, 0.0), (x, y, top)])
        {
            let q = self.transform.apply(&Point3::new(x, y, z));
            lo = Point3::new(lo.x.min(q.x), lo.y.min(q.y), lo.z.min(q.z));
            hi = Point3::new(hi.x.max(q.x), hi.y.max(q.y), hi.z.max(q.z));
        }
        let pad = 0.05;
        vec![
            AxisRange { axis: Axis::X, lo: Some(lo.x - pad), hi: Some(hi.x + pad) },
            AxisRange { axis: Axis::Y, lo: Some(lo.y - pad), hi: Some(hi.y + pad) },
            AxisRange { axis: Axis::Z, lo: Some(lo.z - 0.1), hi: Some(hi.z + 0.1) },
        ]
    }
}

fn triangle_wave(x: f64) -> f64 {
    let t = (x / SMEAR_PERIOD).rem_euclid(1.0);
    if t < 0.5 {
        2.0 * t
    } else {
        2.0 - 2.0 * t
    }
}

/// Samples a scene; identical specs give bit-identical clouds.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let sigma = spec.noise_sigma;
    let jitter = |rng: &mut ChaCha8Rng| {
        if sigma > 0.0 {
            Point3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
        } else {
            Point3::ORIGIN
        }
    };

    let [w, d] = spec.ground_extent;
    let (hx, hy) = (w / 2.0, d / 2.0);
    let per_m = spec.point_density.sqrt();
    let nx = ((w * per_m).round() as usize).max(1);
    let ny = ((d * per_m).round() as usize).max(1);
    let (sx, sy) = (w / nx as f64, d / ny as f64);
    let mut pts = Vec::with_capacity(nx * ny + spec.outliers * 2);
    for j in 0..ny {
        for i in 0..nx {
            let x = -hx + (i as f64 + rng.random::<f64>()) * sx;
            let y = -hy + (j as f64 + rng.random::<f64>()) * sy;
            let mut z = spec.pile.height_at(x, y);
            if z == 0.0 && spec.ground_smear > 0.0 {
                z = spec.ground_smear * (triangle_wave(x) - 0.5);
            }
            pts.push(Point3::new(x, y, z) + jitter(&mut rng));
        }
    }
    let surface_count = pts.len();

    if spec.outliers > 0 {
        let n = rng.random_range(spec.outliers / 2..=spec.outliers * 3 / 2);
        let top = spec.pile.max_height() + 0.6;
        for _ in 0..n {
            pts.push(Point3::new(
                rng.random_range(-hx..hx),
                rng.random_range(-hy..hy),
                rng.random_range(0.05..top),
            ));
        }
    }

    for c in &spec.clutter {
        let center = Point3::from(c.center);
        for _ in 0..c.points {
            let off = match c.shape {
                ClutterShape::Box { size } => Point3::new(
                    (rng.random::<f64>() - 0.5) * size[0],
                    (rng.random::<f64>() - 0.5) * size[1],
                    (rng.random::<f64>() - 0.5) * size[2],
                ),
                ClutterShape::Sphere { radius } => loop {
                    let q = Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    if q.norm() <= 1.0 {
                        break q * radius;
                    }
                },
            };
            pts.push(center + off);
        }
    }

    let transform = if spec.tilt_deg > 0.0 {
        let az = rng.random_range(0.0..2.0 * PI);
        let rotation = RotationMatrix::from_axis_angle(Point3::new(az.cos(), az.sin(), 0.0), spec.tilt_deg.to_radians());
        let translation = if spec.rigid_offset {
            Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.5..1.5))
        } else {
            Point3::ORIGIN
        };
        RigidTransform { rotation, translation }
    } else {
        RigidTransform::IDENTITY
    };
    if transform != RigidTransform::IDENTITY {
        for p in pts.iter_mut() {
            *p = transform.apply(p);
        }
    }

    Ok(Scene {
        cloud: PointCloud::from_points(pts),
        true_volume: spec.pile.true_volume(),
        true_ground_height: 0.0,
        spec: spec.clone(),
        transform,
        surface_count,
    })
}

/// Ground rectangle for each catalogue footprint.
pub fn extent_for_area(area: f64) -> [f64; 2] {
    match area {
        a if (a - 1.3).abs() < 1e-9 => [1.3, 1.0],
        a if (a - 2.6).abs() < 1e-9 => [2.0, 1.3],
        a if (a - 5.2).abs() < 1e-9 => [2.6, 2.0],
        a => [a.sqrt(), a.sqrt()],
    }
}

/// Cone with `h = r/2` holding `volume`.
pub fn cone_for_volume(volume: f64) -> PileShape {
    let r = (6.0 * volume / PI).cbrt();
    PileShape::Cone { r, h: 0.5 * r }
}

/// Frustum with `r2 = r1/2`, `h = 0.4·r1` holding `volume`.
pub fn frustum_for_volume(volume: f64) -> PileShape {
    let r1 = (3.0 * volume / (0.7 * PI)).cbrt();
    PileShape::Frustum { r1, r2: 0.5 * r1, h: 0.4 * r1 }
}

/// Height field with `h = 0.4·r` holding `volume`.
pub fn heightfield_for_volume(volume: f64, seed: u64) -> PileShape {
    let r = (volume / (0.2 * PI)).cbrt();
    PileShape::Heightfield { r, h: 0.4 * r, seed }
}

/// Footprint (m²) and pile volume (m³) pairs of the catalogue.
pub const CATALOGUE_GRID: [(f64, f64); 6] = [(1.3, 0.014), (1.3, 0.028), (1.3, 0.035), (2.6, 0.028), (2.6, 0.035), (5.2, 0.335)];

/// Tilts cycled through the catalogue, degrees.
const CATALOGUE_TILTS: [f64; 4] = [0.0, 3.0, 6.0, 10.0];

/// The 18 benchmark scenes: each footprint/volume pair as a cone, a frustum
/// and a height field, with noise, clutter, outliers and tilts up to 10°.
pub fn reference_scenes() -> Vec<SceneSpec> {
    let mut out = Vec::with_capacity(18);
    for (g, &(area, volume)) in CATALOGUE_GRID.iter().enumerate() {
        let extent = extent_for_area(area);
        let shapes = [
            cone_for_volume(volume),
            frustum_for_volume(volume),
            heightfield_for_volume(volume, 7 + g as u64),
        ];
        for shape in shapes {
            let i = out.len();
            let mut s = SceneSpec::new(shape, extent, 1000 + i as u64);
            s.tilt_deg = CATALOGUE_TILTS[i % CATALOGUE_TILTS.len()];
            s.rigid_offset = s.tilt_deg > 0.0;
            s.clutter = ClutterSpec::standard_set(extent[0] / 2.0, extent[1] / 2.0);
            s.outliers = 20;
            out.push(s);
        }
    }
    out
}
