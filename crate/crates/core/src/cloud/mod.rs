//! Point-cloud storage, exact kNN queries, PCA, filtered-kNN surface patches
//! and the augmentation / perturbation operators used by the robustness
//! experiments.

pub mod io;
mod kdtree;
mod patch;
mod pca;
mod perturb;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub use kdtree::{Neighbor, SpatialIndex};
pub use patch::{extract_patch, SurfacePatch, MAX_PATCH_K, MIN_PATCH_K};
pub use pca::pca_min_axis;
pub use perturb::{
    add_gaussian_noise, augment_rotations, axis_rotations, downsample, mean_knn_distance,
    SD_NEIGHBORS,
};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Positions with optional per-point edge labels and edge probabilities.
///
/// Construction validates that every coordinate is finite and that label /
/// prediction arrays match the point count.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    labels: Option<Vec<bool>>,
    predictions: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            labels: None,
            predictions: None,
        })
    }

    pub fn from_labeled(points: Vec<Point>, labels: Vec<bool>) -> Result<Self> {
        Self::new(points)?.with_labels(labels)
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_predictions(mut self, predictions: Vec<f64>) -> Result<Self> {
        if predictions.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} points",
                predictions.len(),
                self.points.len()
            )));
        }
        if let Some(i) = predictions.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!("prediction {i} is outside [0, 1]")));
        }
        self.predictions = Some(predictions);
        Ok(self)
    }

    pub fn without_annotations(&self) -> Self {
        Self {
            points: self.points.clone(),
            labels: None,
            predictions: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn predictions(&self) -> Option<&[f64]> {
        self.predictions.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[bool]> {
        self.labels()
            .ok_or_else(|| Error::invalid("point cloud carries no labels"))
    }

    /// Positions of all points labeled as edges.
    pub fn edge_points(&self) -> Result<Vec<Point>> {
        let labels = self.require_labels()?;
        Ok(self
            .points
            .iter()
            .zip(labels)
            .filter(|(_, &edge)| edge)
            .map(|(p, _)| *p)
            .collect())
    }

    pub fn edge_count(&self) -> usize {
        self.labels()
            .map_or(0, |l| l.iter().filter(|&&e| e).count())
    }

    /// Sub-cloud in the order given by `indices`; annotations follow their points.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let mut out = Self::new(points)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i]).collect());
        }
        if let Some(pred) = &self.predictions {
            out.predictions = Some(indices.iter().map(|&i| pred[i]).collect());
        }
        Ok(out)
    }

    /// Applies `f` to every position, keeping labels and dropping predictions.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Result<Self> {
        let mut out = Self::new(self.points.iter().map(f).collect())?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Removes exact coordinate duplicates, keeping the first occurrence.
    /// Returns the filtered cloud and the number of points removed.
    pub fn dedup(&self) -> Result<(Self, usize)> {
        let mut seen = std::collections::HashSet::with_capacity(self.len());
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let p = &self.points[i];
                // +0.0 keeps -0.0 and 0.0 in the same bucket.
                let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
                seen.insert(key)
            })
            .collect();
        let removed = self.len() - keep.len();
        Ok((self.select(&keep)?, removed))
    }
}
