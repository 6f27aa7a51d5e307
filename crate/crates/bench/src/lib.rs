//! Shared fixtures for the benchmarks.

use osfe_core::cloud::{extract_patch, PointCloud, SpatialIndex};
use osfe_core::synth::generate;
use osfe_core::{Hyper, ModelParameters, ShapeKind, ShapeSpec, SurfacePatch};

/// Default-size union-of-boxes cloud with about `points` samples.
pub fn union_cloud(points: usize) -> PointCloud {
    let spec = ShapeSpec::with_point_budget(ShapeKind::default_union(), points, 7).expect("valid shape");
    generate(&spec).expect("shape generates").cloud
}

/// Freshly initialized k=16 model.
pub fn model() -> ModelParameters {
    ModelParameters::init(Hyper::new(16).expect("k=16 is valid"), 3)
}

/// The first `n` k=16 patches of `cloud`.
pub fn patches(cloud: &PointCloud, n: usize) -> Vec<SurfacePatch> {
    let index = SpatialIndex::build(cloud).expect("nonempty cloud");
    (0..n.min(cloud.len()))
        .map(|i| extract_patch(cloud, &index, i, 16).expect("patch"))
        .collect()
}
