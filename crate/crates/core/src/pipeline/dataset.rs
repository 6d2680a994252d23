use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::{DatasetRecord, Manifest, Split, MANIFEST_FILE};
use super::{stable_hash, worker_pool};
use crate::entropy::entropy_map_from_views;
use crate::error::{Error, Result};
use crate::mesh::{normalize_to_unit_cube, read_off};
use crate::render::{render_all_views, RenderConfig};
use crate::viewrig::Rig;
use crate::voxel::{voxelize, VoxelizeOptions};

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub workers: usize,
    /// Fraction of each category's models to keep, in `(0, 1]`.
    pub subsample: f64,
    pub seed: u64,
    pub rig: Rig,
    pub render: RenderConfig,
    pub voxel: VoxelizeOptions,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            workers: 1,
            subsample: 1.0,
            seed: 0,
            rig: Rig::default(),
            render: RenderConfig::default(),
            voxel: VoxelizeOptions::default(),
        }
    }
}

/// A model file discovered under `category/split/`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModelEntry {
    pub object_id: String,
    pub category: String,
    pub split: Split,
    pub path: PathBuf,
}

#[derive(Debug)]
pub struct BuildSummary {
    pub manifest: Manifest,
    /// Models that could not be processed, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Lists `root/<category>/<split>/*.off`, sorted. A category directory
/// without any model file is an error.
pub fn scan_models(root: &Path) -> Result<Vec<ModelEntry>> {
    let mut out = Vec::new();
    for dir in sorted_dir(root)?.into_iter().filter(|p| p.is_dir()) {
        let category = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::invalid(format!("non-UTF-8 category name {}", dir.display())))?
            .to_string();
        let before = out.len();
        for split in [Split::Train, Split::Test] {
            let split_dir = dir.join(split.as_str());
            if !split_dir.is_dir() {
                continue;
            }
            for file in sorted_dir(&split_dir)? {
                let is_off = file
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("off"));
                if !is_off {
                    continue;
                }
                let object_id = file
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| Error::invalid(format!("bad file name {}", file.display())))?
                    .to_string();
                out.push(ModelEntry {
                    object_id,
                    category: category.clone(),
                    split,
                    path: file,
                });
            }
        }
        if out.len() == before {
            return Err(Error::invalid(format!("category {category} has no .off models")));
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no categories under {}", root.display())));
    }
    Ok(out)
}

/// Keeps a seeded uniform draw of `round(fraction * n)` (at least one) models
/// from every (category, split) group.
pub fn subsample_models(models: Vec<ModelEntry>, fraction: f64, seed: u64) -> Result<Vec<ModelEntry>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(models);
    }
    let groups: BTreeSet<(String, Split)> =
        models.iter().map(|m| (m.category.clone(), m.split)).collect();
    let mut out = Vec::new();
    for (category, split) in groups {
        let group: Vec<&ModelEntry> = models
            .iter()
            .filter(|m| m.category == category && m.split == split)
            .collect();
        let keep = ((group.len() as f64 * fraction).round() as usize).clamp(1, group.len());
        let key = format!("{category}/{split}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&key));
        let mut picked = rand::seq::index::sample(&mut rng, group.len(), keep).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| group[i].clone()));
    }
    out.sort();
    Ok(out)
}

fn process_model(entry: &ModelEntry, out: &Path, options: &BuildOptions) -> Result<DatasetRecord> {
    let mesh = normalize_to_unit_cube(&read_off(&entry.path)?)?;
    let grid = voxelize(&mesh, options.voxel)?;
    let views = render_all_views(&mesh, &options.rig, options.render)?;
    let map = entropy_map_from_views(&views)?;

    let voxel_path = format!("voxels/{}.voxg", entry.object_id);
    grid.write(&out.join(&voxel_path))?;
    let view_dir = out.join("views").join(&entry.object_id);
    std::fs::create_dir_all(&view_dir).map_err(|e| Error::io(&view_dir, e))?;
    let mut view_paths = Vec::with_capacity(views.len());
    for (i, img) in views.iter().enumerate() {
        let rel = format!("views/{}/view_{i:02}.pgm", entry.object_id);
        img.write_pgm(&out.join(&rel))?;
        view_paths.push(rel);
    }
    Ok(DatasetRecord {
        object_id: entry.object_id.clone(),
        category: entry.category.clone(),
        split: entry.split,
        voxel_path,
        entropies: map.to_vector(),
        view_paths,
    })
}

/// Normalizes, voxelizes and renders every model under `model_root`, writing
/// grids, view images and `manifest.csv` into `out`. Records are sorted by
/// object id, so the output does not depend on the worker count.
pub fn build_dataset(model_root: &Path, out: &Path, options: &BuildOptions) -> Result<BuildSummary> {
    let models = subsample_models(scan_models(model_root)?, options.subsample, options.seed)?;
    let mut ids = BTreeSet::new();
    for m in &models {
        if !ids.insert(m.object_id.as_str()) {
            return Err(Error::invalid(format!("duplicate object id {}", m.object_id)));
        }
    }
    let voxel_dir = out.join("voxels");
    std::fs::create_dir_all(&voxel_dir).map_err(|e| Error::io(&voxel_dir, e))?;
    info!(
        "building dataset from {} models with {} workers",
        models.len(),
        options.workers
    );

    let pool = worker_pool(options.workers)?;
    let results: Vec<Result<DatasetRecord>> = pool.install(|| {
        models
            .par_iter()
            .map(|m| process_model(m, out, options))
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (entry, result) in models.iter().zip(results) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => {
                warn!("skipping {}: {e}", entry.path.display());
                skipped.push((entry.path.clone(), e.to_string()));
            }
        }
    }
    records.sort_by(|a, b| a.object_id.cmp(&b.object_id));
    let manifest = Manifest {
        root: out.to_path_buf(),
        records,
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(BuildSummary { manifest, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(n: usize, category: &str, split: Split) -> Vec<ModelEntry> {
        (0..n)
            .map(|i| ModelEntry {
                object_id: format!("{category}_{i:04}"),
                category: category.into(),
                split,
                path: PathBuf::from(format!("{category}_{i:04}.off")),
            })
            .collect()
    }

    #[test]
    fn subsample_fractions() {
        let mut all = entries(30, "a", Split::Train);
        all.extend(entries(9, "b", Split::Train));
        all.extend(entries(3, "b", Split::Test));
        let third = subsample_models(all.clone(), 1.0 / 3.0, 5).unwrap();
        let count = |v: &[ModelEntry], c: &str, s: Split| {
            v.iter().filter(|m| m.category == c && m.split == s).count()
        };
        assert_eq!(count(&third, "a", Split::Train), 10);
        assert_eq!(count(&third, "b", Split::Train), 3);
        assert_eq!(count(&third, "b", Split::Test), 1);
        let twentieth = subsample_models(all.clone(), 0.05, 5).unwrap();
        assert_eq!(count(&twentieth, "a", Split::Train), 2);
        assert_eq!(count(&twentieth, "b", Split::Test), 1);
        assert_eq!(subsample_models(all.clone(), 1.0, 5).unwrap(), all);
        assert_eq!(
            subsample_models(all.clone(), 0.1, 5).unwrap(),
            subsample_models(all.clone(), 0.1, 5).unwrap()
        );
        assert!(subsample_models(all.clone(), 0.0, 5).is_err());
        assert!(subsample_models(all, 1.5, 5).is_err());
    }
}
