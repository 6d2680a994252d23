use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{EntropyPredictor, ViewPrediction, ViewPredictor};
use crate::entropy::EntropyMap;
use crate::error::{Error, Result};
use crate::render::DepthImage;
use crate::viewrig::VIEW_COUNT;
use crate::voxel::{pool_voxels, VoxelGrid};

/// Block size of the average pooling applied to depth images.
pub const IMAGE_POOL: usize = 8;
pub const POOLED_IMAGE_SIZE: usize = 28;
/// Block size of the occupancy pooling applied to voxel grids.
pub const VOXEL_POOL: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnOptions {
    pub k: usize,
    /// Added to every distance before inverting it into a weight.
    pub epsilon: f64,
}

impl Default for KnnOptions {
    fn default() -> Self {
        KnnOptions { k: 5, epsilon: 1e-9 }
    }
}

impl KnnOptions {
    pub fn check(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Indices and weights of the `k` nearest rows. When the nearest distance is
/// zero only the exact matches vote, with equal weight.
fn neighbours(rows: &[Vec<f64>], query: &[f64], options: KnnOptions) -> Vec<(usize, f64)> {
    let mut d: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (l1(r, query), i)).collect();
    let k = options.k.min(d.len());
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance);
        d.truncate(k);
    }
    d.sort_by(by_distance);
    if d[0].0 == 0.0 {
        d.iter().take_while(|(dist, _)| *dist == 0.0).map(|&(_, i)| (i, 1.0)).collect()
    } else {
        d.iter().map(|&(dist, i)| (i, 1.0 / (dist + options.epsilon))).collect()
    }
}

/// Nearest-neighbour regression of entropy maps from 4x-pooled occupancy.
#[derive(Clone, Debug)]
pub struct KnnEntropyPredictor {
    options: KnnOptions,
    features: Vec<Vec<f64>>,
    maps: Vec<EntropyMap>,
}

fn grid_features(grid: &VoxelGrid) -> Result<Vec<f64>> {
    Ok(pool_voxels(grid, VOXEL_POOL)?.values)
}

impl KnnEntropyPredictor {
    pub fn train(dataset: Vec<(VoxelGrid, EntropyMap)>, options: KnnOptions) -> Result<Self> {
        options.check()?;
        if dataset.is_empty() {
            return Err(Error::invalid("k-NN entropy predictor needs a nonempty dataset"));
        }
        let features = dataset
            .par_iter()
            .map(|(g, _)| grid_features(g))
            .collect::<Result<Vec<_>>>()?;
        if features.iter().any(|f| f.len() != features[0].len()) {
            return Err(Error::invalid("training grids differ in size"));
        }
        Ok(KnnEntropyPredictor {
            options,
            features,
            maps: dataset.into_iter().map(|(_, m)| m).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

impl EntropyPredictor for KnnEntropyPredictor {
    fn predict_map(&self, grid: &VoxelGrid) -> Result<EntropyMap> {
        let q = grid_features(grid)?;
        if q.len() != self.features[0].len() {
            return Err(Error::invalid("query grid size differs from the training grids"));
        }
        let nb = neighbours(&self.features, &q, self.options);
        let total: f64 = nb.iter().map(|(_, w)| w).sum();
        let mut acc = vec![0.0; VIEW_COUNT];
        for &(i, w) in &nb {
            for (a, v) in acc.iter_mut().zip(self.maps[i].to_vector()) {
                *a += w * v;
            }
        }
        EntropyMap::from_vector(&acc.into_iter().map(|a| a / total).collect::<Vec<_>>())
    }
}

/// Training example for [`KnnViewPredictor`].
#[derive(Clone, Debug)]
pub struct LabeledView {
    pub image: DepthImage,
    pub category: String,
    pub view_index: usize,
}

/// Averages `8x8` pixel blocks.
pub fn image_features(image: &DepthImage) -> Result<Vec<f64>> {
    let (w, h) = (image.width(), image.height());
    if w % IMAGE_POOL != 0 || h % IMAGE_POOL != 0 {
        return Err(Error::invalid(format!(
            "image {w}x{h} is not divisible into {IMAGE_POOL}x{IMAGE_POOL} blocks"
        )));
    }
    let (bw, bh) = (w / IMAGE_POOL, h / IMAGE_POOL);
    let mut out = vec![0.0; bw * bh];
    for (r, row) in image.pixels().chunks(w).enumerate() {
        let base = (r / IMAGE_POOL) * bw;
        for (c, &p) in row.iter().enumerate() {
            out[base + c / IMAGE_POOL] += p as f64;
        }
    }
    let area = (IMAGE_POOL * IMAGE_POOL) as f64;
    out.iter_mut().for_each(|v| *v /= area);
    Ok(out)
}

/// Nearest-neighbour single-view classifier with class and viewpoint heads.
#[derive(Clone, Debug)]
pub struct KnnViewPredictor {
    options: KnnOptions,
    categories: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<(usize, usize)>,
}

impl KnnViewPredictor {
    pub fn train(dataset: Vec<LabeledView>, options: KnnOptions) -> Result<Self> {
        options.check()?;
        if dataset.is_empty() {
            return Err(Error::invalid("k-NN view predictor needs a nonempty dataset"));
        }
        if let Some(v) = dataset.iter().find(|v| v.view_index >= VIEW_COUNT) {
            return Err(Error::invalid(format!("view index {} outside 0..60", v.view_index)));
        }
        let categories: Vec<String> = dataset
            .iter()
            .map(|v| v.category.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let features = dataset
            .par_iter()
            .map(|v| image_features(&v.image))
            .collect::<Result<Vec<_>>>()?;
        if features.iter().any(|f| f.len() != features[0].len()) {
            return Err(Error::invalid("training images differ in size"));
        }
        let labels = dataset
            .iter()
            .map(|v| {
                let c = categories.binary_search(&v.category).expect("category collected above");
                (c, v.view_index)
            })
            .collect();
        Ok(KnnViewPredictor {
            options,
            categories,
            features,
            labels,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn try_predict(&self, image: &DepthImage) -> Result<ViewPrediction> {
        let q = image_features(image)?;
        if q.len() != self.features[0].len() {
            return Err(Error::invalid("query image size differs from the training images"));
        }
        let nb = neighbours(&self.features, &q, self.options);
        let total: f64 = nb.iter().map(|(_, w)| w).sum();
        let mut class = vec![0.0; self.categories.len()];
        let mut view = vec![0.0; VIEW_COUNT];
        for &(i, w) in &nb {
            let (c, v) = self.labels[i];
            class[c] += w / total;
            view[v] += w / total;
        }
        let class_scores: BTreeMap<String, f64> =
            self.categories.iter().cloned().zip(class).collect();
        Ok(ViewPrediction {
            class_scores,
            viewpoint_scores: view,
        })
    }
}

impl ViewPredictor for KnnViewPredictor {
    /// Panics if the image cannot be pooled into 8x8 blocks or differs in size
    /// from the training images; use [`KnnViewPredictor::try_predict`] to get
    /// an error instead.
    fn predict(&self, image: &DepthImage) -> ViewPrediction {
        self.try_predict(image).expect("query image incompatible with the training set")
    }
}
