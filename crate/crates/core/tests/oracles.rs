mod common;

use common::*;
use osfe_core::cloud::{extract_patch, pca_min_axis, Point, PointCloud, SpatialIndex, Vec3};
use osfe_core::eval::{chamfer, match_counts, normalize_pair, MATCH_RADIUS};
use osfe_core::rbf::distance_matrices;
use osfe_core::segment::knn_graph;
use rand::Rng;

const FIXTURES: u64 = 100;

fn fixture(seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    let n = r.random_range(40..=2000);
    if seed % 3 == 0 {
        lattice_points(&mut r, n.min(600), 12)
    } else {
        random_points(&mut r, n)
    }
}

#[test]
fn knn_matches_exhaustive_search() {
    for seed in 0..FIXTURES {
        let pts = fixture(seed);
        let index = SpatialIndex::from_points(&pts).unwrap();
        let mut r = rng(seed + 1000);
        for _ in 0..20 {
            let k = r.random_range(1..=40);
            let q = if r.random_bool(0.5) {
                pts[r.random_range(0..pts.len())]
            } else {
                Point::new(r.random::<f64>() * 12.0, r.random::<f64>(), r.random::<f64>() * 12.0)
            };
            let got: Vec<(usize, f64)> = index.knn(&q, k).iter().map(|n| (n.index, n.dist2)).collect();
            assert_eq!(got, brute_knn(&pts, &q, k, None), "seed {seed}");
        }
    }
}

#[test]
fn knn_excluding_self_matches_exhaustive_search() {
    for seed in 0..FIXTURES {
        let pts = fixture(seed);
        let index = SpatialIndex::from_points(&pts).unwrap();
        for i in (0..pts.len()).step_by(37) {
            let got: Vec<(usize, f64)> = index.knn_excluding(i, 10).iter().map(|n| (n.index, n.dist2)).collect();
            assert_eq!(got, brute_knn(&pts, &pts[i], 10, Some(i)), "seed {seed} point {i}");
        }
    }
}

#[test]
fn filtered_knn_matches_reference() {
    for seed in 0..FIXTURES {
        let mut r = rng(seed);
        let n = r.random_range(40..=2000);
        let pts = random_points(&mut r, n);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        for i in (0..n).step_by(53) {
            for k in [4, 8, 16] {
                let patch = extract_patch(&cloud, &index, i, k).unwrap();
                let (neighbors, normal) = reference_patch(&pts, i, k);
                assert_eq!(patch.neighbors, neighbors, "seed {seed} point {i} k {k}");
                assert!((patch.normal - normal).norm() < 1e-9, "seed {seed} point {i}");
                let s = patch.dvecs.iter().map(|d| d.norm()).sum::<f64>() / k as f64;
                assert!((patch.scale - s).abs() <= 1e-12 * s);
            }
        }
    }
}

#[test]
fn pca_matches_closed_form() {
    let mut r = rng(77);
    for _ in 0..200 {
        let n = r.random_range(3..40);
        let stretch = Vec3::new(1.0, r.random_range(0.2..1.0), r.random_range(0.0..0.2));
        let rot = random_rotation(&mut r);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| rot * Vec3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>()).component_mul(&stretch))
            .collect();
        let got = pca_min_axis(&pts).unwrap();
        let want = min_eigenvector(covariance(&pts));
        assert!((got - want).norm() < 1e-8, "{got:?} vs {want:?}");
    }
}

#[test]
fn distance_matrices_match_double_loop() {
    let mut r = rng(5);
    for _ in 0..FIXTURES {
        let m = r.random_range(2..=32);
        let dvecs: Vec<Vec3> = (0..m)
            .map(|_| Vec3::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
            .collect();
        let s = r.random_range(0.05..2.0);
        let got = distance_matrices(&dvecs, s).unwrap();
        let (euc, cos) = reference_matrices(&dvecs, s);
        for i in 0..m * m {
            assert!((got.euc[i] - euc[i]).abs() <= 1e-12);
            assert!((got.cos[i] - cos[i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn chamfer_and_matching_match_exhaustive_search() {
    for seed in 0..FIXTURES {
        let mut r = rng(seed + 500);
        let (na_len, nb_len) = (r.random_range(1..400), r.random_range(1..400));
        let a = random_points(&mut r, na_len);
        let mut b = random_points(&mut r, nb_len);
        // Planted near-matches at distance 0.01.
        for p in a.iter().take(20) {
            b.push(p + Vec3::new(0.01, 0.0, 0.0));
        }
        let (na, nb) = normalize_pair(&a, &b).unwrap();
        let cd = chamfer(&na, &nb).unwrap();
        assert!((cd - brute_chamfer(&na, &nb)).abs() <= 1e-12, "seed {seed}");
        assert_eq!(cd, chamfer(&nb, &na).unwrap());
        let c = match_counts(&na, &nb, MATCH_RADIUS).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.gt_matched), brute_match(&na, &nb, MATCH_RADIUS), "seed {seed}");
    }
}

#[test]
fn knn_graph_matches_exhaustive_search() {
    for seed in 0..FIXTURES {
        let pts = fixture(seed);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        assert_eq!(knn_graph(&cloud, 5).unwrap(), brute_graph(&pts, 5), "seed {seed}");
    }
}
