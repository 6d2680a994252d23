use std::path::Path;

use log::info;
use rayon::prelude::*;

use super::evaluate::evaluate;
use super::manifest::{DatasetRecord, Manifest, Split};
use super::recognize::{recognize_object, EntropySource, RecognitionOptions, ResultRow};
use super::stable_hash;
use crate::entropy::entropy_map_from_views;
use crate::error::{Error, Result};
use crate::fusion::PoseOffset;
use crate::mesh::{add_gaussian_noise, normalize_to_unit_cube, read_off, TriangleMesh};
use crate::render::{render_all_views, RenderConfig};
use crate::voxel::{voxelize, VoxelizeOptions};

pub const DEFAULT_SIGMAS: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.10];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseRow {
    pub sigma: f64,
    pub class_accuracy: f64,
    pub pose_accuracy: f64,
    pub mean_views: f64,
}

pub struct SweepOptions<'a> {
    pub sigmas: Vec<f64>,
    pub seed: u64,
    pub recognition: RecognitionOptions<'a>,
    pub render: RenderConfig,
    pub voxel: VoxelizeOptions,
}

/// Noisy copy of a normalized mesh. It is refit to the unit cube only when
/// the noise pushed it outside, so `sigma == 0` returns the input unchanged.
pub fn perturb(mesh: &TriangleMesh, sigma: f64, seed: u64) -> Result<TriangleMesh> {
    let noisy = add_gaussian_noise(mesh, sigma, seed)?;
    if noisy.is_normalized() {
        Ok(noisy)
    } else {
        normalize_to_unit_cube(&noisy)
    }
}

fn test_mesh_path(model_root: &Path, record: &DatasetRecord) -> std::path::PathBuf {
    model_root
        .join(&record.category)
        .join(Split::Test.as_str())
        .join(format!("{}.off", record.object_id))
}

fn noisy_result(
    mesh: &TriangleMesh,
    record: &DatasetRecord,
    sigma: f64,
    options: &SweepOptions<'_>,
) -> Result<ResultRow> {
    let seed = options.seed ^ stable_hash(&record.object_id);
    let noisy = perturb(mesh, sigma, seed)?;
    let views = render_all_views(&noisy, &options.recognition.rig, options.render)?;
    let map = match options.recognition.entropy {
        EntropySource::Oracle => entropy_map_from_views(&views)?,
        EntropySource::Model(m) => m.predict_map(&voxelize(&noisy, options.voxel)?)?,
    };
    let (_, fused, _) = recognize_object(
        &record.object_id,
        &map,
        |i| Ok(views[i].clone()),
        &options.recognition,
    )?;
    Ok(ResultRow {
        object_id: record.object_id.clone(),
        true_category: record.category.clone(),
        predicted_category: fused.category,
        true_pose: PoseOffset::default(),
        predicted_pose: fused.pose,
        views_used: fused.views_used,
    })
}

/// Perturbs every test mesh at each sigma, re-renders it and re-runs
/// recognition. Test meshes are read from `model_root/<category>/test/<id>.off`.
/// The view source must be a model because noisy views are not on disk.
pub fn noise_sweep(manifest: &Manifest, model_root: &Path, options: &SweepOptions<'_>) -> Result<Vec<NoiseRow>> {
    if matches!(options.recognition.views, crate::predict::exchange::ViewSource::Table(_)) {
        return Err(Error::invalid("noise sweep needs a view model, not an exchange file"));
    }
    let tests: Vec<&DatasetRecord> = manifest.split(Split::Test).collect();
    let meshes = tests
        .par_iter()
        .map(|r| normalize_to_unit_cube(&read_off(&test_mesh_path(model_root, r))?))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(options.sigmas.len());
    for &sigma in &options.sigmas {
        let results = tests
            .par_iter()
            .zip(&meshes)
            .map(|(r, m)| noisy_result(m, r, sigma, options))
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&results, manifest)?;
        info!(
            "sigma {sigma}: class {:.4} pose {:.4}",
            report.class_accuracy, report.pose_accuracy
        );
        rows.push(NoiseRow {
            sigma,
            class_accuracy: report.class_accuracy,
            pose_accuracy: report.pose_accuracy,
            mean_views: report.mean_views,
        });
    }
    Ok(rows)
}

pub fn noise_table_csv(rows: &[NoiseRow]) -> String {
    let mut out = String::from("sigma,class_accuracy,pose_accuracy,mean_views\n");
    for r in rows {
        out += &format!(
            "{:?},{:?},{:?},{:?}\n",
            r.sigma, r.class_accuracy, r.pose_accuracy, r.mean_views
        );
    }
    out
}
