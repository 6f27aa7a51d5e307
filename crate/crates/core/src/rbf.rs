//! Fixed (non-learned) RBF descriptor math: the Gaussian basis over
//! scale-normalized inter-neighbor distances and the cubic basis over
//! neighbor-direction cosines.

use crate::cloud::Vec3;
use crate::error::{Error, Result};

const COSINE_SLACK: f64 = 1e-6;

/// `exp(-r^2)` for a scale-normalized distance `r >= 0`.
pub fn gaussian_basis(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("Gaussian basis needs a finite r >= 0, got {r}")));
    }
    Ok((-r * r).exp())
}

/// `x^3` for a cosine `x`, clamped to `[-1, 1]`.
pub fn cubic_basis(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + COSINE_SLACK {
        return Err(Error::invalid(format!("cosine {x} is out of range")));
    }
    let x = x.clamp(-1.0, 1.0);
    Ok(x * x * x)
}

/// Row-major `m x m` Gaussian and cubic basis matrices over one neighbor group.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrices {
    pub m: usize,
    pub euc: Vec<f64>,
    pub cos: Vec<f64>,
}

impl DistanceMatrices {
    pub fn euc_at(&self, a: usize, b: usize) -> f64 {
        self.euc[a * self.m + b]
    }

    pub fn cos_at(&self, a: usize, b: usize) -> f64 {
        self.cos[a * self.m + b]
    }
}

/// Basis matrices for centered neighbor vectors `dvecs` at patch scale `scale`.
///
/// `euc[a][b] = exp(-(|d_a - d_b| / scale)^2)`, `cos[a][b] = (u_a . u_b)^3`
/// with `u = d / |d|`. Diagonals are exactly 1.
pub fn distance_matrices(dvecs: &[Vec3], scale: f64) -> Result<DistanceMatrices> {
    let m = dvecs.len();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 neighbors, got {m}")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let mut units = Vec::with_capacity(m);
    for (j, d) in dvecs.iter().enumerate() {
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::DuplicatePoint { index: j, other: j });
        }
        units.push(d / n);
    }

    let mut euc = vec![0.0; m * m];
    let mut cos = vec![0.0; m * m];
    for a in 0..m {
        euc[a * m + a] = 1.0;
        cos[a * m + a] = 1.0;
        for b in (a + 1)..m {
            let r = (dvecs[a] - dvecs[b]).norm() / scale;
            let e = gaussian_basis(r)?;
            let c = cubic_basis(units[a].dot(&units[b]))?;
            euc[a * m + b] = e;
            euc[b * m + a] = e;
            cos[a * m + b] = c;
            cos[b * m + a] = c;
        }
    }
    Ok(DistanceMatrices { m, euc, cos })
}
