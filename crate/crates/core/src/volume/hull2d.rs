//! Andrew's monotone chain.

use super::VolumeError;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    /// Counter-clockwise, starting at the lexicographically smallest vertex.
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
}

#[inline]
pub fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area of a counter-clockwise polygon.
pub fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Convex hull without collinear boundary points.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Result<Polygon2, VolumeError> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(VolumeError::DegenerateInput(format!("{} distinct points", pts.len())));
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(VolumeError::DegenerateInput("all points collinear".into()));
    }
    let area = shoelace(&hull);
    Ok(Polygon2 { vertices: hull, area })
}
