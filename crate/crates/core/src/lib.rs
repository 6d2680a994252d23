//! Multi-view object recognition and pose estimation from best views.
//!
//! Meshes are normalized to the unit cube, voxelized, and rendered as depth
//! images from a fixed 60-camera rig. The entropy of each view forms a 5x12
//! map whose local maxima are the best views; per-view class and viewpoint
//! predictions on those views are fused by majority vote into a category and
//! a discrete pose offset.

pub mod entropy;
pub mod error;
pub mod fusion;
pub mod geom;
pub mod mesh;
pub mod pipeline;
pub mod predict;
pub mod render;
pub mod synth;
pub mod viewrig;
pub mod voxel;

pub use error::{Error, Result};
