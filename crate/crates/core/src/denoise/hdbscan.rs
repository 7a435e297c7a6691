//! HDBSCAN over Euclidean 3D points.
//!
//! Chain: core distances (k-th neighbor, the point itself counted first),
//! mutual reachability, minimum spanning tree, single-linkage hierarchy,
//! condensed tree, Excess-of-Mass selection.
//!
//! Edges are ordered by `(weight, lower index, higher index)`. That order is
//! strict, so the MST is unique and both MST builders return the same edge
//! set; everything downstream is therefore deterministic.

use std::cmp::Ordering;

use crate::cloud::{Point3, PointCloud};
use crate::spatial::{box_distance, KdTree};

use super::{ClusterLabels, DenoiseError, HdbscanParams};

/// Inputs up to this size use the dense Prim builder.
pub const DENSE_MST_MAX: usize = 5000;

/// Cap on lambda (1/distance) so coincident points keep stabilities finite.
const LAMBDA_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    fn new(i: usize, j: usize, weight: f64) -> Self {
        MstEdge { a: i.min(j), b: i.max(j), weight }
    }

    fn key_cmp(&self, o: &MstEdge) -> Ordering {
        self.weight
            .total_cmp(&o.weight)
            .then(self.a.cmp(&o.a))
            .then(self.b.cmp(&o.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MstAlgorithm {
    /// Dense Prim below [`DENSE_MST_MAX`] points, kd-tree Borůvka above.
    Auto,
    DensePrim,
    Boruvka,
}

/// Distance to the `min_samples`-th nearest neighbor, counting the point
/// itself as the first.
pub fn core_distances(points: &[Point3], min_samples: usize) -> Vec<f64> {
    let tree = KdTree::build(points);
    points
        .iter()
        .map(|p| tree.knn_distances(p, min_samples).last().copied().unwrap_or(0.0))
        .collect()
}

#[inline]
pub fn mutual_reachability(points: &[Point3], core: &[f64], i: usize, j: usize) -> f64 {
    core[i].max(core[j]).max(points[i].distance(&points[j]))
}

/// Minimum spanning tree of the mutual-reachability graph, edges sorted by key.
pub fn minimum_spanning_tree(points: &[Point3], core: &[f64], algo: MstAlgorithm) -> Vec<MstEdge> {
    let mut edges = match algo {
        MstAlgorithm::DensePrim => prim_dense(points, core),
        MstAlgorithm::Boruvka => boruvka_kdtree(points, core),
        MstAlgorithm::Auto if points.len() <= DENSE_MST_MAX => prim_dense(points, core),
        MstAlgorithm::Auto => boruvka_kdtree(points, core),
    };
    edges.sort_by(MstEdge::key_cmp);
    edges
}

/// Sum of edge weights in ascending key order.
pub fn mst_total_weight(edges: &[MstEdge]) -> f64 {
    let mut sorted = edges.to_vec();
    sorted.sort_by(MstEdge::key_cmp);
    sorted.iter().map(|e| e.weight).sum()
}

fn prim_dense(points: &[Point3], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut best: Vec<MstEdge> = (0..n).map(|v| MstEdge::new(v, v, f64::INFINITY)).collect();
    let mut remaining: Vec<usize> = (1..n).collect();
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    while !remaining.is_empty() {
        let mut pick = 0usize;
        for (slot, &v) in remaining.iter().enumerate() {
            let cand = MstEdge::new(current, v, mutual_reachability(points, core, current, v));
            if best[v].weight.is_infinite() || cand.key_cmp(&best[v]) == Ordering::Less {
                best[v] = cand;
            }
            if best[v].key_cmp(&best[remaining[pick]]) == Ordering::Less {
                pick = slot;
            }
        }
        let v = remaining.swap_remove(pick);
        edges.push(best[v]);
        current = v;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

fn boruvka_kdtree(points: &[Point3], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let tree = KdTree::build(points);
    let nodes = &tree.nodes;
    // Children always carry larger ids than their parent.
    let mut node_min_core = vec![f64::INFINITY; nodes.len()];
    for id in (0..nodes.len()).rev() {
        node_min_core[id] = match nodes[id].children {
            Some((l, r)) => node_min_core[l].min(node_min_core[r]),
            None => tree.index[nodes[id].start..nodes[id].end]
                .iter()
                .map(|&i| core[i])
                .fold(f64::INFINITY, f64::min),
        };
    }

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    let mut comp = vec![0usize; n];
    let mut node_comp: Vec<Option<usize>> = vec![None; nodes.len()];
    let none_edge = |c: usize| MstEdge::new(c, c, f64::INFINITY);
    let mut best: Vec<MstEdge> = (0..n).map(none_edge).collect();
    let mut stack = Vec::new();

    while edges.len() < n - 1 {
        for (i, c) in comp.iter_mut().enumerate() {
            *c = uf.find(i);
        }
        for id in (0..nodes.len()).rev() {
            node_comp[id] = match nodes[id].children {
                Some((l, r)) => match (node_comp[l], node_comp[r]) {
                    (Some(a), Some(b)) if a == b => Some(a),
                    _ => None,
                },
                None => {
                    let idx = &tree.index[nodes[id].start..nodes[id].end];
                    let c0 = comp[idx[0]];
                    idx.iter().all(|&i| comp[i] == c0).then_some(c0)
                }
            };
        }
        for i in 0..n {
            best[i] = none_edge(i);
        }

        for a in 0..n {
            let c = comp[a];
            if core[a] > best[c].weight {
                continue;
            }
            let pa = &points[a];
            stack.clear();
            stack.push(0usize);
            while let Some(id) = stack.pop() {
                if node_comp[id] == Some(c) {
                    continue;
                }
                let node = &nodes[id];
                let lb = core[a]
                    .max(node_min_core[id])
                    .max(box_distance(pa, &node.lo, &node.hi));
                if lb > best[c].weight {
                    continue;
                }
                match node.children {
                    Some((l, r)) => {
                        let dl = box_distance(pa, &nodes[l].lo, &nodes[l].hi);
                        let dr = box_distance(pa, &nodes[r].lo, &nodes[r].hi);
                        if dl <= dr {
                            stack.push(r);
                            stack.push(l);
                        } else {
                            stack.push(l);
                            stack.push(r);
                        }
                    }
                    None => {
                        for &b in &tree.index[node.start..node.end] {
                            if comp[b] == c {
                                continue;
                            }
                            let cand = MstEdge::new(a, b, mutual_reachability(points, core, a, b));
                            if cand.key_cmp(&best[c]) == Ordering::Less {
                                best[c] = cand;
                            }
                        }
                    }
                }
            }
        }

        let mut progressed = false;
        for c in 0..n {
            if comp[c] != c || best[c].weight.is_infinite() {
                continue;
            }
            let e = best[c];
            if uf.union(e.a, e.b) {
                edges.push(e);
                progressed = true;
            }
        }
        debug_assert!(progressed, "Borůvka round added no edge");
        if !progressed {
            break;
        }
    }
    edges
}

/// One merge of the single-linkage hierarchy; node ids `n..2n-1`.
#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, sorted_edges: &[MstEdge]) -> Vec<Merge> {
    let mut uf = UnionFind::new(2 * n);
    // Representative set id -> hierarchy node id.
    let mut node_of: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in sorted_edges {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let (na, nb) = (node_of[ra], node_of[rb]);
        let new_id = n + merges.len();
        let s = size[na] + size[nb];
        merges.push(Merge { left: na, right: nb, distance: e.weight, size: s });
        size[new_id] = s;
        uf.union(ra, rb);
        let r = uf.find(ra);
        node_of[r] = new_id;
    }
    merges
}

/// Condensed cluster tree. Cluster 0 is the root.
#[derive(Debug, Clone, Default)]
pub struct CondensedTree {
    pub parent: Vec<Option<usize>>,
    pub birth_lambda: Vec<f64>,
    pub size: Vec<usize>,
    /// `(cluster, point, lambda)`: the point left `cluster` at `lambda`.
    pub points: Vec<(usize, usize, f64)>,
}

impl CondensedTree {
    pub fn cluster_count(&self) -> usize {
        self.parent.len()
    }

    pub fn stabilities(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.parent.len()];
        for &(c, _, lambda) in &self.points {
            s[c] += lambda - self.birth_lambda[c];
        }
        for c in 1..self.parent.len() {
            if let Some(p) = self.parent[c] {
                s[p] += (self.birth_lambda[c] - self.birth_lambda[p]) * self.size[c] as f64;
            }
        }
        s
    }
}

fn lambda_of(d: f64) -> f64 {
    if d > 0.0 {
        (1.0 / d).min(LAMBDA_MAX)
    } else {
        LAMBDA_MAX
    }
}

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let mut tree = CondensedTree::default();
    if n < min_cluster_size || merges.len() + 1 != n {
        return tree;
    }
    let node_size = |id: usize| if id < n { 1 } else { merges[id - n].size };
    let leaves_under = |id: usize, out: &mut Vec<usize>| {
        let mut st = vec![id];
        while let Some(x) = st.pop() {
            if x < n {
                out.push(x);
            } else {
                st.push(merges[x - n].right);
                st.push(merges[x - n].left);
            }
        }
    };

    tree.parent.push(None);
    tree.birth_lambda.push(0.0);
    tree.size.push(n);
    let root = if n == 1 { 0 } else { 2 * n - 2 };
    let mut stack = vec![(root, 0usize)];
    let mut buf = Vec::new();
    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            // A cluster never shrinks to a single hierarchy leaf while
            // min_cluster_size >= 2; kept for completeness.
            tree.points.push((cluster, node, LAMBDA_MAX));
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (ls, rs) = (node_size(m.left), node_size(m.right));
        let big_l = ls >= min_cluster_size;
        let big_r = rs >= min_cluster_size;
        match (big_l, big_r) {
            (true, true) => {
                for (child, s) in [(m.left, ls), (m.right, rs)] {
                    let id = tree.parent.len();
                    tree.parent.push(Some(cluster));
                    tree.birth_lambda.push(lambda);
                    tree.size.push(s);
                    stack.push((child, id));
                }
            }
            (false, false) => {
                for child in [m.left, m.right] {
                    buf.clear();
                    leaves_under(child, &mut buf);
                    tree.points.extend(buf.iter().map(|&p| (cluster, p, lambda)));
                }
            }
            (true, false) | (false, true) => {
                let (keep, drop) = if big_l { (m.left, m.right) } else { (m.right, m.left) };
                buf.clear();
                leaves_under(drop, &mut buf);
                tree.points.extend(buf.iter().map(|&p| (cluster, p, lambda)));
                stack.push((keep, cluster));
            }
        }
    }
    tree
}

/// Excess-of-Mass selection; the root is eligible, so a cloud holding one
/// dominant cluster yields that cluster rather than its fragments.
pub fn select_clusters(tree: &CondensedTree) -> Vec<bool> {
    let k = tree.cluster_count();
    let stability = tree.stabilities();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in 1..k {
        if let Some(p) = tree.parent[c] {
            children[p].push(c);
        }
    }
    let mut selected = vec![false; k];
    let mut subtree = stability.clone();
    // Children are created after their parents.
    for c in (0..k).rev() {
        if children[c].is_empty() {
            selected[c] = true;
            continue;
        }
        let sum: f64 = children[c].iter().map(|&ch| subtree[ch]).sum();
        if sum > stability[c] {
            selected[c] = false;
            subtree[c] = sum;
        } else {
            selected[c] = true;
        }
    }
    for c in 0..k {
        if let Some(p) = tree.parent[c] {
            if selected[p] || covered(&selected, tree, p) {
                selected[c] = false;
            }
        }
    }
    selected
}

fn covered(selected: &[bool], tree: &CondensedTree, mut c: usize) -> bool {
    while let Some(p) = tree.parent[c] {
        if selected[p] {
            return true;
        }
        c = p;
    }
    false
}

/// Full HDBSCAN labelling.
pub fn hdbscan(cloud: &PointCloud, params: &HdbscanParams) -> Result<ClusterLabels, DenoiseError> {
    hdbscan_with(cloud, params, MstAlgorithm::Auto)
}

pub fn hdbscan_with(cloud: &PointCloud, params: &HdbscanParams, algo: MstAlgorithm) -> Result<ClusterLabels, DenoiseError> {
    params.validate()?;
    let pts = cloud.points();
    let n = pts.len();
    if n < params.min_cluster_size {
        return Ok(ClusterLabels::all_noise(n));
    }
    let core = core_distances(pts, params.min_samples);
    let mst = minimum_spanning_tree(pts, &core, algo);
    let merges = single_linkage(n, &mst);
    let tree = condense(n, &merges, params.min_cluster_size);
    let selected = select_clusters(&tree);

    let k = tree.cluster_count();
    let mut owner: Vec<Option<usize>> = vec![None; k];
    for c in 0..k {
        owner[c] = if selected[c] { Some(c) } else { tree.parent[c].and_then(|p| owner[p]) };
    }
    let mut raw: Vec<Option<usize>> = vec![None; n];
    for &(c, p, _) in &tree.points {
        raw[p] = owner[c];
    }
    Ok(ClusterLabels::canonical(raw))
}
