use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainConfig;
use crate::cloud::{augment_rotations, extract_patch, PointCloud, SpatialIndex, SurfacePatch};
use crate::error::{Error, Result};

/// One training example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub patch: SurfacePatch,
    pub label: bool,
    /// Index of the point in the original (unrotated) cloud.
    pub origin: usize,
    /// Which cloud copy the patch came from; 0 is the original.
    pub copy: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

impl Dataset {
    pub fn train_edge_count(&self) -> usize {
        self.train.iter().filter(|s| s.label).count()
    }
}

/// Original-point indices of the validation split, sorted.
pub fn validation_points(n: usize, val_fraction: f64, seed: u64) -> Result<Vec<usize>> {
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::invalid(format!(
            "val_fraction {val_fraction} leaves an empty split for {n} points"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = order[..n_val].to_vec();
    val.sort_unstable();
    Ok(val)
}

/// Extracts one patch per point for every cloud copy and splits them by
/// original point, so rotated copies never straddle train and val.
pub fn build_dataset(cloud: &PointCloud, cfg: &TrainConfig) -> Result<Dataset> {
    cfg.validate()?;
    let labels = cloud.require_labels()?.to_vec();
    let n = cloud.len();
    if n < 2 * cfg.k + 1 {
        return Err(Error::invalid(format!("need at least {} points for k={}, got {n}", 2 * cfg.k + 1, cfg.k)));
    }
    let copies = if cfg.augment { augment_rotations(cloud) } else { vec![cloud.clone()] };
    let mut in_val = vec![false; n];
    for i in validation_points(n, cfg.val_fraction, cfg.seed)? {
        in_val[i] = true;
    }
    let mut dataset = Dataset { train: Vec::new(), val: Vec::new() };
    for (c, copy) in copies.iter().enumerate() {
        let index = SpatialIndex::build(copy)?;
        let patches = (0..n)
            .into_par_iter()
            .map(|i| extract_patch(copy, &index, i, cfg.k))
            .collect::<Result<Vec<_>>>()?;
        for (i, patch) in patches.into_iter().enumerate() {
            let sample = Sample { patch, label: labels[i], origin: i, copy: c };
            if in_val[i] {
                dataset.val.push(sample);
            } else {
                dataset.train.push(sample);
            }
        }
    }
    Ok(dataset)
}
