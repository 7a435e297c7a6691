//! Spatial indexes: a uniform hash grid for fixed-radius queries and a
//! kd-tree for k-nearest-neighbor and custom pruned traversals.

use std::collections::HashMap;

use crate::cloud::Point3;

/// Uniform grid keyed by integer cell coordinates. Points within `radius`
/// of each other always fall in the same or adjacent cells.
pub struct HashGrid<'a> {
    points: &'a [Point3],
    cell: f64,
    origin: Point3,
    order: Vec<usize>,
    cells: HashMap<(i64, i64, i64), (usize, usize)>,
}

impl<'a> HashGrid<'a> {
    pub fn new(points: &'a [Point3], radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite());
        // Slightly oversized cells keep float rounding in the floor() from
        // separating true neighbors by two cells.
        let cell = radius * (1.0 + 1e-9);
        let origin = points.iter().fold(
            Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            |m, p| Point3::new(m.x.min(p.x), m.y.min(p.y), m.z.min(p.z)),
        );
        let key_of = |p: &Point3| cell_key(p, &origin, cell);
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by_key(|&i| (key_of(&points[i]), i));
        let mut cells = HashMap::new();
        let mut start = 0;
        while start < order.len() {
            let k = key_of(&points[order[start]]);
            let mut end = start + 1;
            while end < order.len() && key_of(&points[order[end]]) == k {
                end += 1;
            }
            cells.insert(k, (start, end));
            start = end;
        }
        HashGrid { points, cell, origin, order, cells }
    }

    /// Calls `f(j)` for every candidate index in the 27 cells around `p`.
    /// Returning `false` from `f` stops the scan early.
    pub fn for_each_candidate<F: FnMut(usize) -> bool>(&self, p: &Point3, mut f: F) {
        let (cx, cy, cz) = cell_key(p, &self.origin, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(&(s, e)) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in &self.order[s..e] {
                            if !f(j) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn points(&self) -> &[Point3] {
        self.points
    }
}

#[inline]
fn cell_key(p: &Point3, origin: &Point3, cell: f64) -> (i64, i64, i64) {
    (
        ((p.x - origin.x) / cell).floor() as i64,
        ((p.y - origin.y) / cell).floor() as i64,
        ((p.z - origin.z) / cell).floor() as i64,
    )
}

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
pub(crate) struct KdNode {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub start: usize,
    pub end: usize,
    /// Child node indices; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

/// Static kd-tree over a point slice. Node 0 is the root; `index` holds the
/// point permutation so every node owns a contiguous range of it.
pub struct KdTree<'a> {
    pub(crate) points: &'a [Point3],
    pub(crate) index: Vec<usize>,
    pub(crate) nodes: Vec<KdNode>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut tree = KdTree { points, index: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = bounds(self.points, &self.index[start..end]);
        let id = self.nodes.len();
        self.nodes.push(KdNode { lo, hi, start, end, children: None });
        if end - start > LEAF_SIZE {
            let dim = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = start + (end - start) / 2;
            let pts = self.points;
            self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a].to_array()[dim]
                    .total_cmp(&pts[b].to_array()[dim])
                    .then(a.cmp(&b))
            });
            let l = self.build_node(start, mid);
            let r = self.build_node(mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distances to the `k` nearest points of `q` (the point itself counts
    /// when it is part of the tree), ascending.
    pub fn knn_distances(&self, q: &Point3, k: usize) -> Vec<f64> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let bound = if best.len() == k { best[k - 1] } else { f64::INFINITY };
            if box_distance(q, &node.lo, &node.hi) > bound {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    let dl = box_distance(q, &self.nodes[l].lo, &self.nodes[l].hi);
                    let dr = box_distance(q, &self.nodes[r].lo, &self.nodes[r].hi);
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &i in &self.index[node.start..node.end] {
                        let d = q.distance(&self.points[i]);
                        if best.len() < k || d < best[best.len() - 1] {
                            let pos = best.partition_point(|&b| b <= d);
                            best.insert(pos, d);
                            best.truncate(k);
                        }
                    }
                }
            }
        }
        best
    }
}

fn bounds(points: &[Point3], idx: &[usize]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        let a = points[i].to_array();
        for d in 0..3 {
            lo[d] = lo[d].min(a[d]);
            hi[d] = hi[d].max(a[d]);
        }
    }
    (lo, hi)
}

/// Lower bound on the distance from `q` to any point in the box. Shrunk by a
/// relative hair so rounding never makes it exceed a true point distance.
#[inline]
pub(crate) fn box_distance(q: &Point3, lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    let a = q.to_array();
    let mut s = 0.0;
    for d in 0..3 {
        let v = if a[d] < lo[d] {
            lo[d] - a[d]
        } else if a[d] > hi[d] {
            a[d] - hi[d]
        } else {
            0.0
        };
        s += v * v;
    }
    s.sqrt() * (1.0 - 1e-12)
}
