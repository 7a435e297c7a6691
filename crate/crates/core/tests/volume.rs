use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pilevol_core::volume::hull2d::convex_hull_2d;
use pilevol_core::volume::hull3d::convex_hull_3d;
use pilevol_core::{
    column_volume_grid, column_volume_uniform, hull3d_volume, slice_volume, Aggregator, CompensationFactor, GridSpec, Point3, PointCloud,
};

const CONE_V: f64 = PI * 0.25 * 0.6 / 3.0;

/// Uniform samples over the disk footprint lifted onto the cone surface.
fn cone_surface(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (r, t) = (0.5 * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            Point3::new(r * t.cos(), r * t.sin(), 0.6 * (1.0 - r / 0.5))
        })
        .collect()
}

#[test]
fn uniform_cone_within_one_percent() {
    let n = 100_000;
    let v = column_volume_uniform(&cone_surface(n, 1), PI * 0.25 / n as f64, CompensationFactor::NONE, true).unwrap();
    assert!((v.volume / CONE_V - 1.0).abs() <= 0.01, "{}", v.volume);
}

/// Dense-sampling limit of the MAX grid on the cone: each touched cell takes
/// the cone height at its point nearest the apex.
fn cone_max_envelope(cs: f64) -> f64 {
    let near = |a: f64, b: f64| if a <= 0.0 && 0.0 <= b { 0.0 } else { a.abs().min(b.abs()) };
    let n = (0.5 / cs).ceil() as i64 + 1;
    let mut v = 0.0;
    for i in -n..n {
        for j in -n..n {
            let (x0, y0) = (i as f64 * cs, j as f64 * cs);
            let d = near(x0, x0 + cs).hypot(near(y0, y0 + cs));
            if d < 0.5 {
                v += cs * cs * 0.6 * (1.0 - d / 0.5);
            }
        }
    }
    v
}

#[test]
fn grid_cone_max_envelope_and_mean() {
    let c = cone_surface(100_000, 2);
    let env = cone_max_envelope(0.02);
    let max = column_volume_grid(&c, &GridSpec::new(0.02, Aggregator::Max), CompensationFactor::NONE).unwrap().volume;
    assert!(max <= env && max >= 0.98 * env, "{max} vs {env}");
    // MAX sits on the upper corner of every sloped cell; MEAN tracks the surface.
    assert!(max > 1.05 * CONE_V);
    let mean = column_volume_grid(&c, &GridSpec::new(0.02, Aggregator::Mean), CompensationFactor::NONE).unwrap().volume;
    assert!((mean / CONE_V - 1.0).abs() <= 0.03, "{mean}");
}

#[test]
fn flat_slab_within_boundary_ring() {
    let c: PointCloud = (0..200 * 200).map(|i| Point3::new((i % 200) as f64 * 0.005 + 0.0025, (i / 200) as f64 * 0.005 + 0.0025, 0.3)).collect();
    let v = column_volume_grid(&c, &GridSpec::new(0.05, Aggregator::Max), CompensationFactor::NONE).unwrap();
    assert!((v.volume - 0.3).abs() <= 4.0 * 0.05 * 0.3);
}

#[test]
fn slices_of_cylinder() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = PointCloud::new();
    for _ in 0..60_000 {
        let t = rng.random_range(0.0..2.0 * PI);
        c.push(Point3::new(0.5 * t.cos(), 0.5 * t.sin(), rng.random_range(0.0..1.0)));
    }
    let v = slice_volume(&c, 0.1).unwrap().volume;
    assert!((v / (PI * 0.25) - 1.0).abs() <= 0.03, "{v}");
}

#[test]
fn slices_of_cone_pathologies() {
    let c = cone_surface(100_000, 4);
    let coarse = slice_volume(&c, 0.6 + 1e-9).unwrap().volume;
    assert!((coarse / (3.0 * CONE_V) - 1.0).abs() <= 0.05, "{coarse}");
    let fine = slice_volume(&c, 0.05).unwrap().volume;
    let starved = slice_volume(&c, 1e-7).unwrap().volume;
    assert!(starved < CONE_V && CONE_V < coarse);
    assert!((fine / CONE_V - 1.0).abs() < 0.5);
    assert_eq!(slice_volume(&cone_surface(2, 5), 0.1).unwrap().volume, 0.0);
}

#[test]
fn sphere_hull_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pts = Vec::new();
    while pts.len() < 10_000 {
        let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm() <= 1.0 {
            pts.push(p);
        }
    }
    let h = convex_hull_3d(&pts).unwrap();
    let ball = 4.0 * PI / 3.0;
    assert!(h.volume >= 0.95 * ball && h.volume <= ball, "{}", h.volume);
    // Every input point lies inside or on every face plane.
    for f in &h.faces {
        let (a, b, c) = (pts[f[0]], pts[f[1]], pts[f[2]]);
        let n = (b - a).cross(&(c - a));
        assert!(pts.iter().all(|p| n.dot(&(*p - a)) <= 1e-9));
    }
}

#[test]
fn disk_hull_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pts = Vec::new();
    while pts.len() < 1000 {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] <= 1.0 {
            pts.push(p);
        }
    }
    let a = convex_hull_2d(&pts).unwrap().area;
    assert!(a >= 0.9 * PI && a <= PI);
}

/// Hull by testing every ordered pair as a candidate edge, then ordered
/// counter-clockwise from the lexicographic minimum.
fn brute_hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut next = std::collections::BTreeMap::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j && (0..pts.len()).all(|k| k == i || k == j || cross(pts[i], pts[j], pts[k]) > 0.0) {
                next.insert(i, j);
            }
        }
    }
    let start = *next.keys().min_by(|&&a, &&b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1]))).unwrap();
    let mut out = vec![pts[start]];
    let mut cur = next[&start];
    while cur != start {
        out.push(pts[cur]);
        cur = next[&cur];
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hull2d_equals_brute_force(pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..200)) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let h = convex_hull_2d(&pts).unwrap();
        let want = brute_hull(&pts);
        prop_assert_eq!(&h.vertices, &want);
        prop_assert_eq!(h.area, area(&want));
    }

    #[test]
    fn uniform_scales_linearly(zs in prop::collection::vec(-1.0..3.0f64, 0..300), a in 1e-4..1.0f64, k in 0..6i32, f in 0.6..1.9f64) {
        let c: PointCloud = zs.iter().map(|&z| Point3::new(0.0, 0.0, z)).collect();
        let base = column_volume_uniform(&c, a, CompensationFactor::NONE, true).unwrap().volume;
        let two = 2f64.powi(k);
        prop_assert_eq!(column_volume_uniform(&c, a * two, CompensationFactor::NONE, true).unwrap().volume, base * two);
        let scaled = column_volume_uniform(&c, a, CompensationFactor::new(f).unwrap(), true).unwrap().volume;
        prop_assert!((scaled - f * base).abs() <= 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn grid_max_monotone(pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -0.2..1.0f64), 0..200), extra in (-1.0..1.0f64, -1.0..1.0f64, -0.2..1.0f64)) {
        let grid = GridSpec::new(0.1, Aggregator::Max);
        let mut c: PointCloud = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let before = column_volume_grid(&c, &grid, CompensationFactor::NONE).unwrap().volume;
        c.push(Point3::new(extra.0, extra.1, extra.2));
        prop_assert!(column_volume_grid(&c, &grid, CompensationFactor::NONE).unwrap().volume >= before);
    }

    #[test]
    fn hull_covers_grid_on_convex_solid(r in 0.2..1.0f64, h in 0.1..1.0f64, seed in any::<u64>()) {
        // Cone surface plus its base disk: a closed convex solid.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = PointCloud::new();
        for _ in 0..4000 {
            let (s, t) = (r * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            c.push(Point3::new(s * t.cos(), s * t.sin(), h * (1.0 - s / r)));
            c.push(Point3::new(s * t.cos(), s * t.sin(), 0.0));
        }
        let cell = 0.02;
        let hull = hull3d_volume(&c).unwrap().volume;
        let grid = column_volume_grid(&c, &GridSpec::new(cell, Aggregator::Max), CompensationFactor::NONE).unwrap().volume;
        let ring = 2.0 * PI * r * cell * h;
        prop_assert!(hull >= grid - ring, "hull {} grid {}", hull, grid);
    }
}
