use super::{pca_min_axis, PointCloud, SpatialIndex, Vec3};
use crate::error::{Error, Result};

pub const MIN_PATCH_K: usize = 4;
pub const MAX_PATCH_K: usize = 64;

/// A target point and its filtered-kNN neighborhood, the classifier's input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub center: usize,
    /// Neighbor ids, ordered like `dvecs`.
    pub neighbors: Vec<usize>,
    /// `p_j - p_i`, ordered by nondecreasing norm (ties by index).
    pub dvecs: Vec<Vec3>,
    /// `|d_j . normal|` for each neighbor.
    pub offsets: Vec<f64>,
    /// Minimal-variance axis of the 2k candidate neighborhood.
    pub normal: Vec3,
    /// Mean neighbor distance.
    pub scale: f64,
}

impl SurfacePatch {
    pub fn k(&self) -> usize {
        self.dvecs.len()
    }

    /// Builds a patch from raw neighbor vectors, computing offsets and scale.
    /// Ordering is the caller's responsibility.
    pub fn from_parts(center: usize, neighbors: Vec<usize>, dvecs: Vec<Vec3>, normal: Vec3) -> Result<Self> {
        if dvecs.is_empty() || dvecs.len() != neighbors.len() {
            return Err(Error::invalid("patch needs matching, nonempty neighbor lists"));
        }
        let offsets = dvecs.iter().map(|d| d.dot(&normal).abs()).collect();
        let scale = dvecs.iter().map(|d| d.norm()).sum::<f64>() / dvecs.len() as f64;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateNeighborhood(format!("patch scale {scale}")));
        }
        Ok(Self {
            center,
            neighbors,
            dvecs,
            offsets,
            normal,
            scale,
        })
    }

    /// Applies a rotation to the patch geometry; offsets and scale are
    /// unchanged because `normal` co-rotates.
    pub fn rotated(&self, rot: &nalgebra::Matrix3<f64>) -> Self {
        Self {
            dvecs: self.dvecs.iter().map(|d| rot * d).collect(),
            normal: rot * self.normal,
            ..self.clone()
        }
    }

    /// Uniformly rescales the patch geometry.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dvecs: self.dvecs.iter().map(|d| d * factor).collect(),
            offsets: self.offsets.iter().map(|o| o * factor).collect(),
            scale: self.scale * factor,
            ..self.clone()
        }
    }
}

/// Filtered-kNN patch around point `i`.
///
/// Takes the 2k Euclidean neighbors, estimates the minimal-variance axis over
/// them, and keeps the k with the smallest offset along that axis, which
/// rejects points from the opposite side of thin structures. Near small clouds
/// (fewer than 2k other points but at least k) all available points are used
/// as candidates.
pub fn extract_patch(cloud: &PointCloud, index: &SpatialIndex, i: usize, k: usize) -> Result<SurfacePatch> {
    if k % 2 != 0 || !(MIN_PATCH_K..=MAX_PATCH_K).contains(&k) {
        return Err(Error::invalid(format!(
            "k must be even and within [{MIN_PATCH_K}, {MAX_PATCH_K}], got {k}"
        )));
    }
    if index.len() != cloud.len() {
        return Err(Error::invalid("spatial index does not match the cloud"));
    }
    if i >= cloud.len() {
        return Err(Error::invalid(format!("point {i} out of range")));
    }
    let available = cloud.len() - 1;
    if available < k {
        return Err(Error::InsufficientNeighborhood {
            needed: k + 1,
            available: cloud.len(),
        });
    }

    let points = cloud.points();
    let center = points[i];
    let candidates = index.knn_excluding(i, (2 * k).min(available));
    if let Some(dup) = candidates.iter().find(|n| n.dist2 == 0.0) {
        return Err(Error::DuplicatePoint {
            index: i,
            other: dup.index,
        });
    }

    let cand_pts: Vec<Vec3> = candidates.iter().map(|n| points[n.index].coords).collect();
    let normal = pca_min_axis(&cand_pts)?;

    let mut ranked: Vec<(f64, f64, usize, Vec3)> = candidates
        .iter()
        .map(|n| {
            let d = points[n.index] - center;
            (d.dot(&normal).abs(), n.dist2, n.index, d)
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    ranked.truncate(k);
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));

    let neighbors = ranked.iter().map(|r| r.2).collect();
    let dvecs = ranked.iter().map(|r| r.3).collect();
    SurfacePatch::from_parts(i, neighbors, dvecs, normal)
}
