//! One-shot edge detection on 3D point clouds.
//!
//! A classifier is learned from a single labeled cloud: every point becomes a
//! filtered-kNN surface patch, each patch is described by learned RBF
//! descriptors over Gaussian (distance) and cubic (cosine) basis matrices, a
//! small transformer encodes the `(k, 6)` token matrix and an MLP outputs the
//! edge probability. The crate also ships the evaluation metrics, BFS surface
//! segmentation and a synthetic CAD-like generator with analytic edge labels.

pub mod cloud;
pub mod error;
pub mod eval;
pub mod net;
pub mod rbf;
pub mod segment;
pub mod synth;
pub mod train;

pub use cloud::{PointCloud, SpatialIndex, SurfacePatch};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use net::{Hyper, ModelParameters};
pub use segment::SegmentationResult;
pub use synth::{ShapeKind, ShapeSpec};
pub use train::{TrainConfig, TrainLog};
