use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pilevol_core::denoise::hdbscan::{core_distances, minimum_spanning_tree, mst_total_weight, MstAlgorithm};
use pilevol_core::denoise::{hdbscan, largest_cluster, radius_inliers, radius_outlier_filter, robust_filter, ClusterLabels};
use pilevol_core::{HdbscanParams, Point3, PointCloud, RadiusFilterParams};

fn blob(rng: &mut ChaCha8Rng, center: Point3, sigma: f64, n: usize) -> Vec<Point3> {
    let g = Normal::new(0.0, sigma).unwrap();
    (0..n).map(|_| center + Point3::new(g.sample(rng), g.sample(rng), g.sample(rng))).collect()
}

fn brute_radius(pts: &[Point3], r0: f64, n_min: usize) -> Vec<usize> {
    (0..pts.len())
        .filter(|&i| (0..pts.len()).filter(|&j| j != i && pts[i].distance(&pts[j]) <= r0).count() >= n_min)
        .collect()
}

/// k-th nearest distance counting the point itself, by full sort.
fn brute_core(pts: &[Point3], k: usize) -> Vec<f64> {
    pts.iter()
        .map(|p| {
            let mut d: Vec<f64> = pts.iter().map(|q| p.distance(q)).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Prim over the explicit mutual-reachability matrix; returns the sorted
/// edge weights and the edges.
fn brute_prim(pts: &[Point3], core: &[f64]) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
    let n = pts.len();
    let mr = |i: usize, j: usize| core[i].max(core[j]).max(pts[i].distance(&pts[j]));
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    best[0] = 0.0;
    let mut edges = Vec::new();
    for _ in 0..n {
        let u = (0..n).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[u] = true;
        if u != 0 {
            edges.push((from[u], u, best[u]));
        }
        for v in 0..n {
            if !in_tree[v] && mr(u, v) < best[v] {
                best[v] = mr(u, v);
                from[v] = u;
            }
        }
    }
    let mut w: Vec<f64> = edges.iter().map(|e| e.2).collect();
    w.sort_by(f64::total_cmp);
    (w, edges)
}

/// Components left after cutting the heaviest MST edge.
fn split_at_heaviest(n: usize, edges: &[(usize, usize, f64)]) -> Vec<usize> {
    let cut = (0..edges.len()).max_by(|&a, &b| edges[a].2.total_cmp(&edges[b].2)).unwrap();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    for (k, &(a, b, _)) in edges.iter().enumerate() {
        if k != cut {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            comp[ra] = rb;
        }
    }
    (0..n).map(|i| find(&mut comp, i)).collect()
}

#[test]
fn radius_filter_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut pts = blob(&mut rng, Point3::ORIGIN, 0.1, 5000);
    pts.extend((0..50).map(|_| Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))));
    let c = PointCloud::from_points(pts.clone());
    for (r0, n_min) in [(0.02, 4), (0.05, 10), (0.2, 1)] {
        let got = radius_inliers(&c, &RadiusFilterParams { r0, n_min });
        assert_eq!(got, brute_radius(&pts, r0, n_min), "r0={r0} n_min={n_min}");
    }
}

#[test]
fn core_distances_match_sorting() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts = blob(&mut rng, Point3::ORIGIN, 1.0, 400);
    assert_eq!(core_distances(&pts, 10), brute_core(&pts, 10));
}

#[test]
fn mst_weight_matches_dense_prim_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pts = blob(&mut rng, Point3::ORIGIN, 0.2, 1200);
    pts.extend(blob(&mut rng, Point3::new(2.0, 0.0, 0.0), 0.1, 800));
    let core = core_distances(&pts, 10);
    let (w, _) = brute_prim(&pts, &core);
    let oracle: f64 = w.iter().sum();
    for algo in [MstAlgorithm::DensePrim, MstAlgorithm::Boruvka] {
        let e = minimum_spanning_tree(&pts, &core, algo);
        assert_eq!(e.len(), pts.len() - 1);
        assert_eq!(mst_total_weight(&e), oracle, "{algo:?}");
    }
}

#[test]
fn two_blobs_match_single_linkage_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pts = blob(&mut rng, Point3::ORIGIN, 0.05, 500);
    pts.extend(blob(&mut rng, Point3::new(10.0, 0.0, 0.0), 0.05, 300));
    let c = PointCloud::from_points(pts.clone());
    let labels = hdbscan(&c, &HdbscanParams { min_cluster_size: 20, min_samples: 10 }).unwrap();
    assert_eq!(labels.cluster_count, 2);
    assert_eq!(labels.noise_count(), 0);
    assert_eq!(labels.sizes(), vec![500, 300]);

    let (_, edges) = brute_prim(&pts, &brute_core(&pts, 10));
    let comp = split_at_heaviest(pts.len(), &edges);
    for i in 0..pts.len() {
        for j in [0, 500] {
            assert_eq!(comp[i] == comp[j], labels.labels[i] == labels.labels[j]);
        }
    }
}

#[test]
fn small_cloud_is_noise() {
    let c: PointCloud = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
    let l = hdbscan(&c, &HdbscanParams { min_cluster_size: 10, min_samples: 3 }).unwrap();
    assert_eq!(l.noise_count(), 5);
    assert_eq!(l.cluster_count, 0);
}

#[test]
fn pile_survives_clutter_and_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pile = blob(&mut rng, Point3::ORIGIN, 0.1, 3000);
    let mut pts = pile.clone();
    pts.extend(blob(&mut rng, Point3::new(3.0, 0.0, 0.0), 0.05, 400));
    pts.extend((0..40).map(|_| Point3::new(rng.random_range(-5.0..5.0), rng.random_range(5.0..9.0), rng.random_range(-5.0..5.0))));
    let c = PointCloud::from_points(pts);
    let r = RadiusFilterParams { r0: 0.05, n_min: 4 };
    let out = robust_filter(&c, &r, &HdbscanParams::default()).unwrap();
    // Oracle: radius survivors restricted to the pile blob.
    let kept = radius_outlier_filter(&PointCloud::from_points(pile), &r).unwrap();
    assert!(out.iter().all(|p| p.norm() < 1.0));
    assert!(out.len() as f64 >= 0.98 * kept.len() as f64, "{} of {}", out.len(), kept.len());
}

#[test]
fn clean_blob_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c: PointCloud = (0..2000)
        .map(|i| {
            let (x, y) = ((i % 50) as f64 * 0.008, (i / 50) as f64 * 0.008);
            Point3::new(x + rng.random_range(-0.001..0.001), y + rng.random_range(-0.001..0.001), rng.random_range(-0.002..0.002))
        })
        .collect();
    let out = robust_filter(&c, &RadiusFilterParams::default(), &HdbscanParams::default()).unwrap();
    assert_eq!(out, c);
}

fn arb_blobs() -> impl Strategy<Value = Vec<Point3>> {
    (any::<u64>(), 1..4usize, 20..80usize).prop_map(|(seed, k, per)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for b in 0..k {
            pts.extend(blob(&mut rng, Point3::new(3.0 * b as f64, 0.0, 0.0), 0.2, per + 7 * b));
        }
        pts.extend((0..5).map(|_| Point3::new(rng.random_range(-3.0..9.0), 4.0, rng.random_range(-3.0..3.0))));
        pts
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radius_subset_and_deterministic(pts in arb_blobs(), r0 in 0.05..0.6f64, n_min in 0..8usize) {
        let c = PointCloud::from_points(pts);
        let p = RadiusFilterParams { r0, n_min };
        let a = radius_outlier_filter(&c, &p).unwrap();
        prop_assert_eq!(&a, &radius_outlier_filter(&c, &p).unwrap());
        let idx = radius_inliers(&c, &p);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(a, c.select(&idx));
    }

    #[test]
    fn hdbscan_permutation_covariant(pts in arb_blobs(), shuffle in any::<u64>()) {
        let params = HdbscanParams { min_cluster_size: 15, min_samples: 5 };
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let a = hdbscan(&PointCloud::from_points(pts.clone()), &params).unwrap();
        let permuted: Vec<Point3> = order.iter().map(|&i| pts[i]).collect();
        let b = hdbscan(&PointCloud::from_points(permuted), &params).unwrap();
        let a_perm = ClusterLabels::canonical(order.iter().map(|&i| a.labels[i]).collect());
        prop_assert_eq!(a_perm, ClusterLabels::canonical(b.labels));
    }

    #[test]
    fn largest_cluster_has_max_size(pts in arb_blobs()) {
        let c = PointCloud::from_points(pts);
        let l = hdbscan(&c, &HdbscanParams { min_cluster_size: 15, min_samples: 5 }).unwrap();
        let want = l.sizes().into_iter().max().unwrap_or(0);
        prop_assert_eq!(largest_cluster(&c, &l).unwrap().len(), want);
    }

    #[test]
    fn robust_filter_never_grows(pts in arb_blobs(), r0 in 0.05..0.6f64) {
        let c = PointCloud::from_points(pts);
        let out = robust_filter(&c, &RadiusFilterParams { r0, n_min: 3 }, &HdbscanParams { min_cluster_size: 10, min_samples: 4 }).unwrap();
        prop_assert!(out.len() <= c.len());
    }

    #[test]
    fn prim_and_boruvka_same_weight(pts in arb_blobs(), k in 1..12usize) {
        let core = core_distances(&pts, k);
        let a = mst_total_weight(&minimum_spanning_tree(&pts, &core, MstAlgorithm::DensePrim));
        let b = mst_total_weight(&minimum_spanning_tree(&pts, &core, MstAlgorithm::Boruvka));
        prop_assert_eq!(a, b);
    }
}
