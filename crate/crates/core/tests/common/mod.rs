//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use osfe_core::cloud::{Point, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

/// Points on a coarse lattice so that equal distances (ties) are common.
pub fn lattice_points(rng: &mut impl Rng, n: usize, cells: i32) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point::new(
            rng.random_range(0..cells) as f64,
            rng.random_range(0..cells) as f64,
            rng.random_range(0..cells) as f64,
        );
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    pts
}

pub fn random_rotation(rng: &mut impl Rng) -> nalgebra::Rotation3<f64> {
    let axis = nalgebra::Unit::new_normalize(Vec3::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    ));
    nalgebra::Rotation3::from_axis_angle(&axis, rng.random::<f64>() * std::f64::consts::TAU)
}

pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Exhaustive kNN ordered by (squared distance, index).
pub fn brute_knn(points: &[Point], q: &Point, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, p)| (i, dist2(p, q)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Eigenvector of the smallest eigenvalue of a symmetric 3x3 matrix, via the
/// trigonometric eigenvalue formula and a cross product of two rows of
/// `A - lambda I`. Sign: the largest-magnitude component is positive.
pub fn min_eigenvector(a: [[f64; 3]; 3]) -> Vec3 {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let lambda = if p == 0.0 {
        q
    } else {
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
    };
    let rows: Vec<Vec3> = (0..3)
        .map(|i| Vec3::new(a[i][0], a[i][1], a[i][2]) - Vec3::from_fn(|j, _| if i == j { lambda } else { 0.0 }))
        .collect();
    let mut best = Vec3::zeros();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = rows[i].cross(&rows[j]);
        if c.norm() > best.norm() {
            best = c;
        }
    }
    let mut v = best.normalize();
    let mut lead = 0;
    for i in 1..3 {
        if v[i].abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        v = -v;
    }
    v
}

pub fn covariance(points: &[Vec3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = p - mean;
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += d[i] * d[j] / n;
            }
        }
    }
    c
}

/// Reference filtered-kNN: returns (neighbor indices, normal) or None when
/// the neighborhood is too small.
pub fn reference_patch(points: &[Point], i: usize, k: usize) -> (Vec<usize>, Vec3) {
    let cands = brute_knn(points, &points[i], (2 * k).min(points.len() - 1), Some(i));
    let rel: Vec<Vec3> = cands.iter().map(|&(j, _)| points[j].coords).collect();
    let v = min_eigenvector(covariance(&rel));
    let mut scored: Vec<(f64, f64, usize)> = cands
        .iter()
        .map(|&(j, d2)| ((points[j] - points[i]).dot(&v).abs(), d2, j))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored.truncate(k);
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));
    (scored.iter().map(|s| s.2).collect(), v)
}

/// Double-loop Gaussian and cubic-cosine matrices.
pub fn reference_matrices(dvecs: &[Vec3], s: f64) -> (Vec<f64>, Vec<f64>) {
    let m = dvecs.len();
    let mut euc = vec![0.0; m * m];
    let mut cos = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            let r = (dvecs[a] - dvecs[b]).norm() / s;
            euc[a * m + b] = (-(r * r)).exp();
            let c = dvecs[a].dot(&dvecs[b]) / (dvecs[a].norm() * dvecs[b].norm());
            cos[a * m + b] = c.clamp(-1.0, 1.0).powi(3);
        }
    }
    (euc, cos)
}

pub fn brute_nearest(p: &Point, set: &[Point]) -> f64 {
    set.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min).sqrt()
}

pub fn brute_chamfer(a: &[Point], b: &[Point]) -> f64 {
    let ab: f64 = a.iter().map(|p| brute_nearest(p, b)).sum();
    let ba: f64 = b.iter().map(|p| brute_nearest(p, a)).sum();
    ab / a.len() as f64 + ba / b.len() as f64
}

/// (tp, fp, fn, gt_matched) by exhaustive search.
pub fn brute_match(pred: &[Point], gt: &[Point], radius: f64) -> (usize, usize, usize, usize) {
    let tp = pred.iter().filter(|p| gt.iter().any(|g| dist2(p, g).sqrt() < radius)).count();
    let matched = gt.iter().filter(|g| pred.iter().any(|p| dist2(p, g).sqrt() < radius)).count();
    (tp, pred.len() - tp, gt.len() - matched, matched)
}

/// Symmetrized kNN adjacency by exhaustive search.
pub fn brute_graph(points: &[Point], k: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); points.len()];
    for i in 0..points.len() {
        for (j, _) in brute_knn(points, &points[i], k, Some(i)) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Closest distance to a segment by dense parameter sampling.
pub fn sampled_segment_distance(p: &Point, a: &Point, b: &Point, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            (p - (a + (b - a) * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Two parallel 20x20 sheets, spacing 0.02, separated by `gap` along z.
pub fn parallel_planes(gap: f64) -> Vec<Point> {
    let mut pts = Vec::new();
    for z in [0.0, gap] {
        for a in 0..20 {
            for b in 0..20 {
                pts.push(Point::new(a as f64 * 0.02, b as f64 * 0.02, z));
            }
        }
    }
    pts
}
