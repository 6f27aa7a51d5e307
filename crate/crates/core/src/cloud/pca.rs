use nalgebra::{Matrix3, SymmetricEigen};

use super::Vec3;
use crate::error::{Error, Result};

/// Unit eigenvector of the centered covariance with the smallest eigenvalue.
///
/// The sign is canonicalized so that the largest-magnitude component is
/// positive.
pub fn pca_min_axis(points: &[Vec3]) -> Result<Vec3> {
    if points.len() < 3 {
        return Err(Error::DegenerateNeighborhood(format!(
            "PCA needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let spread = cov.trace();
    if !spread.is_finite() {
        return Err(Error::Numerical("non-finite covariance".into()));
    }
    if spread <= 0.0 {
        return Err(Error::DegenerateNeighborhood(
            "all points coincide".into(),
        ));
    }

    let eig = SymmetricEigen::new(cov);
    let min = (0..3)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap_or(0);
    let axis = eig.eigenvectors.column(min).normalize();
    Ok(canonical_sign(axis))
}

fn canonical_sign(v: Vec3) -> Vec3 {
    let dominant = (0..3)
        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
        .unwrap_or(0);
    if v[dominant] < 0.0 {
        -v
    } else {
        v
    }
}
