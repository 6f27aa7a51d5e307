use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{PointCloud, SpatialIndex};
use crate::error::{Error, Result};

/// Neighbor count used for the noise unit `Sd`.
pub const SD_NEIGHBORS: usize = 16;

/// The six quarter-turn rotations, in order: +x, -x, +y, -y, +z, -z
/// (counterclockwise first). Entries are exact integers.
pub fn axis_rotations() -> [Matrix3<f64>; 6] {
    #[rustfmt::skip]
    let m = [
        Matrix3::new(1.0, 0.0, 0.0,  0.0, 0.0, -1.0,  0.0, 1.0, 0.0),
        Matrix3::new(1.0, 0.0, 0.0,  0.0, 0.0, 1.0,  0.0, -1.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0,  0.0, 1.0, 0.0,  -1.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, -1.0,  0.0, 1.0, 0.0,  1.0, 0.0, 0.0),
        Matrix3::new(0.0, -1.0, 0.0,  1.0, 0.0, 0.0,  0.0, 0.0, 1.0),
        Matrix3::new(0.0, 1.0, 0.0,  -1.0, 0.0, 0.0,  0.0, 0.0, 1.0),
    ];
    m
}

/// The original cloud followed by its six axis quarter-turn rotations.
pub fn augment_rotations(cloud: &PointCloud) -> Vec<PointCloud> {
    let mut out = Vec::with_capacity(7);
    out.push(cloud.clone());
    for rot in axis_rotations() {
        let mut rotated = cloud.clone();
        rotated.points.iter_mut().for_each(|p| *p = rot * *p);
        rotated.predictions = None;
        out.push(rotated);
    }
    out
}

/// Mean over all points of the average distance to their `k` nearest neighbors.
pub fn mean_knn_distance(cloud: &PointCloud, k: usize) -> Result<f64> {
    if cloud.len() < k + 1 {
        return Err(Error::InsufficientNeighborhood {
            needed: k + 1,
            available: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let total: f64 = (0..cloud.len())
        .map(|i| {
            let nn = index.knn_excluding(i, k);
            nn.iter().map(|n| n.distance()).sum::<f64>() / k as f64
        })
        .sum();
    Ok(total / cloud.len() as f64)
}

/// Isotropic Gaussian jitter with per-coordinate std `ratio * Sd`.
pub fn add_gaussian_noise(cloud: &PointCloud, ratio: f64, seed: u64) -> Result<PointCloud> {
    if !(ratio >= 0.0) || !ratio.is_finite() {
        return Err(Error::invalid(format!("noise ratio must be >= 0, got {ratio}")));
    }
    let sd = mean_knn_distance(cloud, SD_NEIGHBORS)?;
    if ratio == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, ratio * sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = cloud.clone();
    out.predictions = None;
    for p in out.points.iter_mut() {
        for c in p.coords.iter_mut() {
            *c += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Uniform random subset of `round(keep_ratio * N)` points, original order kept.
pub fn downsample(cloud: &PointCloud, keep_ratio: f64, seed: u64) -> Result<PointCloud> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::invalid(format!("keep ratio must be in (0, 1], got {keep_ratio}")));
    }
    let keep = (keep_ratio * cloud.len() as f64).round() as usize;
    if keep == 0 {
        return Err(Error::invalid("downsampling would leave no points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, cloud.len(), keep).into_vec();
    chosen.sort_unstable();
    cloud.select(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;

    fn line(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Point::new(i as f64, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn quarter_turns() {
        let r = axis_rotations();
        assert_eq!(r[4] * Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0));
        assert_eq!(r[1] * Point::new(0.0, 0.0, 1.0), Point::new(0.0, 1.0, 0.0));
        for m in r {
            assert_eq!(m.determinant(), 1.0);
            assert_eq!(m * m.transpose(), Matrix3::identity());
        }
        // Each pair is mutually inverse.
        for pair in r.chunks(2) {
            assert_eq!(pair[0] * pair[1], Matrix3::identity());
        }
    }

    #[test]
    fn augmentation_keeps_labels() {
        let c = PointCloud::from_labeled(
            vec![Point::new(1.0, 2.0, 3.0), Point::new(-1.0, 0.5, 0.0)],
            vec![true, false],
        )
        .unwrap();
        let aug = augment_rotations(&c);
        assert_eq!(aug.len(), 7);
        assert_eq!(aug[0], c);
        for a in &aug {
            assert_eq!(a.labels().unwrap(), &[true, false]);
        }
    }

    #[test]
    fn sd_on_a_line() {
        // Interior points of a unit lattice see {1,1,2,2,...,8,8}.
        let c = line(100);
        let idx = SpatialIndex::build(&c).unwrap();
        let nn = idx.knn_excluding(50, 16);
        let mean = nn.iter().map(|n| n.distance()).sum::<f64>() / 16.0;
        assert_eq!(mean, 4.5);
        let sd = mean_knn_distance(&c, 16).unwrap();
        assert!(sd > 4.5 && sd < 5.0);
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = line(20);
        assert_eq!(add_gaussian_noise(&c, 0.0, 7).unwrap(), c);
        assert!(matches!(
            add_gaussian_noise(&line(16), 0.05, 7),
            Err(Error::InsufficientNeighborhood { .. })
        ));
        assert!(add_gaussian_noise(&c, -0.1, 7).is_err());
    }

    #[test]
    fn downsample_counts_and_determinism() {
        let c = line(100);
        assert_eq!(downsample(&c, 1.0, 3).unwrap(), c);
        let a = downsample(&c, 0.75, 3).unwrap();
        let b = downsample(&c, 0.75, 3).unwrap();
        assert_eq!(a.len(), 75);
        assert_eq!(a, b);
        let mut xs: Vec<f64> = a.points().iter().map(|p| p.x).collect();
        let n = xs.len();
        xs.dedup();
        assert_eq!(xs.len(), n);
        assert!(downsample(&c, 0.0, 3).is_err());
        assert!(downsample(&c, 0.001, 3).is_err());
        assert!(downsample(&c, 1.5, 3).is_err());
    }
}
