//! Incremental 3D convex hull.

use std::collections::{BTreeMap, HashSet};

use crate::cloud::{Point3, PointCloud};

use super::{CompensationFactor, Diagnostics, Method, VolumeError, VolumeEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct Hull3 {
    /// Outward-oriented (counter-clockwise seen from outside) triangles.
    pub faces: Vec<[usize; 3]>,
    pub volume: f64,
}

struct Face {
    v: [usize; 3],
    n: Point3,
    off: f64,
}

fn make_face(pts: &[Point3], v: [usize; 3]) -> Face {
    let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
    let n = n / n.norm();
    Face { v, n, off: n.dot(&pts[v[0]]) }
}

fn tet_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    (*b - *a).cross(&(*c - *a)).dot(&(*d - *a)) / 6.0
}

fn initial_simplex(pts: &[Point3], eps: f64) -> Result<[usize; 4], VolumeError> {
    let degenerate = || VolumeError::DegenerateCloud("points are coplanar or fewer than 4".into());
    let i0 = (0..pts.len())
        .min_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(a.cmp(&b)))
        .ok_or_else(degenerate)?;
    let far = |f: &dyn Fn(&Point3) -> f64| -> (usize, f64) {
        (0..pts.len())
            .map(|i| (i, f(&pts[i])))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    };
    let (i1, d1) = far(&|p| p.distance(&pts[i0]));
    if d1 <= eps {
        return Err(degenerate());
    }
    let dir = (pts[i1] - pts[i0]) / d1;
    let (i2, d2) = far(&|p| (*p - pts[i0]).cross(&dir).norm());
    if d2 <= eps {
        return Err(degenerate());
    }
    let n = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
    let n = n / n.norm();
    let (i3, d3) = far(&|p| (*p - pts[i0]).dot(&n).abs());
    if d3 <= eps {
        return Err(degenerate());
    }
    Ok([i0, i1, i2, i3])
}

/// Hull of the points; fails when fewer than 4 are in general position.
pub fn convex_hull_3d(pts: &[Point3]) -> Result<Hull3, VolumeError> {
    if pts.len() < 4 {
        return Err(VolumeError::DegenerateCloud(format!("{} points, need at least 4", pts.len())));
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let eps = 1e-10 * (hi - lo).norm().max(f64::MIN_POSITIVE);
    let s = initial_simplex(pts, eps)?;
    let center = (pts[s[0]] + pts[s[1]] + pts[s[2]] + pts[s[3]]) / 4.0;

    let mut faces: Vec<Face> = Vec::new();
    for tri in [[s[0], s[1], s[2]], [s[0], s[1], s[3]], [s[0], s[2], s[3]], [s[1], s[2], s[3]]] {
        let mut f = make_face(pts, tri);
        if f.n.dot(&center) - f.off > 0.0 {
            f = make_face(pts, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }

    let mut order: Vec<usize> = (0..pts.len()).filter(|i| !s.contains(i)).collect();
    let d: Vec<f64> = pts.iter().map(|p| p.distance(&center)).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));

    let mut visible = Vec::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for &p in &order {
        let q = pts[p];
        visible.clear();
        visible.extend((0..faces.len()).filter(|&f| faces[f].n.dot(&q) - faces[f].off > eps));
        if visible.is_empty() {
            continue;
        }
        edges.clear();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                let e = (v[k], v[(k + 1) % 3]);
                if !edges.contains(&(e.1, e.0)) {
                    horizon.push(e);
                }
            }
        }
        // Remove visible faces, highest index first so swap_remove is safe.
        for &f in visible.iter().rev() {
            faces.swap_remove(f);
        }
        for (a, b) in horizon {
            faces.push(make_face(pts, [a, b, p]));
        }
    }

    let volume: f64 = faces
        .iter()
        .map(|f| tet_volume(&center, &pts[f.v[0]], &pts[f.v[1]], &pts[f.v[2]]))
        .sum();
    Ok(Hull3 { faces: faces.into_iter().map(|f| f.v).collect(), volume })
}

pub fn hull3d_volume(cloud: &PointCloud) -> Result<VolumeEstimate, VolumeError> {
    let h = convex_hull_3d(cloud.points())?;
    Ok(VolumeEstimate {
        volume: h.volume,
        method: Method::Hull3d,
        params: BTreeMap::new(),
        diagnostics: Diagnostics {
            point_count: cloud.len(),
            element_count: h.faces.len(),
            compensation: CompensationFactor::NONE.factor(),
            ground_margin: None,
        },
    })
}
