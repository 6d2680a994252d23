//! Predictor interfaces and k-nearest-neighbour baselines.
//!
//! A [`ViewPredictor`] maps one depth image to class and viewpoint score
//! vectors; an [`EntropyPredictor`] maps an occupancy grid to an entropy map.
//! External models plug in through the JSON-lines format in [`exchange`].

pub mod exchange;
mod knn;

use std::collections::BTreeMap;

use crate::entropy::{entropy_map_from_views, EntropyMap};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::render::{render_all_views, DepthImage, RenderConfig};
use crate::viewrig::{Rig, VIEW_COUNT};
use crate::voxel::VoxelGrid;

pub use knn::{
    image_features, KnnEntropyPredictor, KnnOptions, KnnViewPredictor, LabeledView,
    POOLED_IMAGE_SIZE,
};

/// Tolerance on the sum of a score vector for in-memory predictions.
pub const SCORE_SUM_TOLERANCE: f64 = 1e-9;

/// Per-view output of a single-view classifier: a distribution over
/// categories and one over the 60 rig viewpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPrediction {
    pub class_scores: BTreeMap<String, f64>,
    pub viewpoint_scores: Vec<f64>,
}

impl ViewPrediction {
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        check_distribution("class_scores", self.class_scores.values().copied(), tolerance)?;
        if self.viewpoint_scores.len() != VIEW_COUNT {
            return Err(Error::invalid(format!(
                "viewpoint_scores has {} entries, expected {VIEW_COUNT}",
                self.viewpoint_scores.len()
            )));
        }
        check_distribution("viewpoint_scores", self.viewpoint_scores.iter().copied(), tolerance)
    }

    /// Highest-scoring category; ties go to the smallest name.
    pub fn top_class(&self) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (name, &s) in &self.class_scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((name, s));
            }
        }
        best
    }

    /// Highest-scoring viewpoint index; ties go to the smallest index.
    pub fn top_viewpoint(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.viewpoint_scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    }
}

fn check_distribution(name: &str, scores: impl Iterator<Item = f64>, tolerance: f64) -> Result<()> {
    let mut sum = 0.0;
    let mut count = 0;
    for (i, s) in scores.enumerate() {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::invalid(format!("{name}[{i}] = {s} is not a nonnegative number")));
        }
        sum += s;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if (sum - 1.0).abs() > tolerance {
        return Err(Error::invalid(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Single-view class and viewpoint predictor. Implementations must be
/// deterministic for a given input.
pub trait ViewPredictor: Sync {
    fn predict(&self, image: &DepthImage) -> ViewPrediction;
}

/// Regresses an entropy map from an occupancy grid. Deterministic per input.
pub trait EntropyPredictor: Sync {
    fn predict_map(&self, grid: &VoxelGrid) -> Result<EntropyMap>;
}

/// The expensive path the learned entropy predictors replace: render all 60
/// views and measure their entropy.
#[derive(Clone, Debug, Default)]
pub struct OracleEntropyPredictor {
    pub rig: Rig,
    pub render: RenderConfig,
}

impl OracleEntropyPredictor {
    pub fn predict_mesh(&self, mesh: &TriangleMesh) -> Result<EntropyMap> {
        oracle_entropy_map(mesh, &self.rig, self.render)
    }
}

pub fn oracle_entropy_map(mesh: &TriangleMesh, rig: &Rig, config: RenderConfig) -> Result<EntropyMap> {
    entropy_map_from_views(&render_all_views(mesh, rig, config)?)
}

/// Mean absolute error over the 60 cells.
pub fn map_mae(a: &EntropyMap, b: &EntropyMap) -> f64 {
    let (a, b) = (a.to_vector(), b.to_vector());
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / VIEW_COUNT as f64
}

/// Mean squared error over the 60 cells.
pub fn map_mse(a: &EntropyMap, b: &EntropyMap) -> f64 {
    let (a, b) = (a.to_vector(), b.to_vector());
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / VIEW_COUNT as f64
}

/// Cell-wise mean of a set of maps; the constant baseline for map regression.
pub fn mean_map(maps: &[EntropyMap]) -> Result<EntropyMap> {
    if maps.is_empty() {
        return Err(Error::invalid("mean of an empty set of maps"));
    }
    let mut acc = vec![0.0; VIEW_COUNT];
    for m in maps {
        for (a, v) in acc.iter_mut().zip(m.to_vector()) {
            *a += v;
        }
    }
    let n = maps.len() as f64;
    EntropyMap::from_vector(&acc.into_iter().map(|a| a / n).collect::<Vec<_>>())
}
