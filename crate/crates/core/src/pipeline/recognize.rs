use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::manifest::{DatasetRecord, Manifest, Split};
use crate::entropy::{top_n_views, EntropyMap};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusedPrediction, FusionRule, PoseOffset};
use crate::predict::exchange::{PredictionRecord, ViewSource};
use crate::predict::{EntropyPredictor, KnnEntropyPredictor, KnnOptions, KnnViewPredictor, LabeledView};
use crate::render::DepthImage;
use crate::viewrig::{Rig, VIEW_COUNT};

/// Where the entropy map of an object comes from.
pub enum EntropySource<'a> {
    /// The map measured from the object's rendered views (stored in the manifest).
    Oracle,
    Model(&'a dyn EntropyPredictor),
}

pub struct RecognitionOptions<'a> {
    pub entropy: EntropySource<'a>,
    pub views: ViewSource<'a>,
    /// Keep at most this many best views per object.
    pub max_views: Option<usize>,
    pub rule: FusionRule,
    pub rig: Rig,
}

#[derive(Clone, Debug)]
pub struct RecognitionOutcome {
    pub object_id: String,
    pub true_category: String,
    /// Viewpoint indices of the selected best views, best first.
    pub selected: Vec<usize>,
    pub fused: FusedPrediction,
    /// Per-view predictions in the order of `selected`.
    pub predictions: Vec<PredictionRecord>,
    pub seconds: f64,
}

/// Selects best views from `map`, predicts each one and fuses the votes.
pub fn recognize_object(
    object_id: &str,
    map: &EntropyMap,
    image: impl Fn(usize) -> Result<DepthImage>,
    options: &RecognitionOptions<'_>,
) -> Result<(Vec<usize>, FusedPrediction, Vec<PredictionRecord>)> {
    let peaks = top_n_views(map, options.max_views.unwrap_or(VIEW_COUNT))?;
    let mut votes = Vec::with_capacity(peaks.len());
    let mut records = Vec::with_capacity(peaks.len());
    for peak in &peaks {
        let index = peak.view_index();
        let prediction = options.views.predict(object_id, index, || image(index))?;
        records.push(PredictionRecord::new(object_id, index, prediction.clone()));
        votes.push((options.rig.viewpoint(index)?, prediction));
    }
    let fused = fuse(&votes, options.rule)?;
    Ok((peaks.iter().map(|p| p.view_index()).collect(), fused, records))
}

fn recognize_record(
    manifest: &Manifest,
    record: &DatasetRecord,
    options: &RecognitionOptions<'_>,
) -> Result<RecognitionOutcome> {
    let start = Instant::now();
    let map = match options.entropy {
        EntropySource::Oracle => record.entropy_map()?,
        EntropySource::Model(m) => m.predict_map(&manifest.load_grid(record)?)?,
    };
    let (selected, fused, predictions) =
        recognize_object(&record.object_id, &map, |i| manifest.load_view(record, i), options)?;
    Ok(RecognitionOutcome {
        object_id: record.object_id.clone(),
        true_category: record.category.clone(),
        selected,
        fused,
        predictions,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs recognition on every record of `split` (all records when `None`).
/// Outcomes are in manifest order.
pub fn run_recognition(
    manifest: &Manifest,
    split: Option<Split>,
    options: &RecognitionOptions<'_>,
) -> Result<Vec<RecognitionOutcome>> {
    let records: Vec<&DatasetRecord> = manifest
        .records
        .iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .collect();
    records
        .par_iter()
        .map(|r| recognize_record(manifest, r, options))
        .collect()
}

/// Loads the 60 views of every training record as labelled examples.
pub fn train_view_predictor(manifest: &Manifest, options: KnnOptions) -> Result<KnnViewPredictor> {
    let jobs: Vec<(&DatasetRecord, usize)> = manifest
        .split(Split::Train)
        .flat_map(|r| (0..VIEW_COUNT).map(move |i| (r, i)))
        .collect();
    let data = jobs
        .par_iter()
        .map(|&(r, i)| {
            Ok(LabeledView {
                image: manifest.load_view(r, i)?,
                category: r.category.clone(),
                view_index: i,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    KnnViewPredictor::train(data, options)
}

pub fn train_entropy_predictor(manifest: &Manifest, options: KnnOptions) -> Result<KnnEntropyPredictor> {
    let data = manifest
        .split(Split::Train)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|r| Ok((manifest.load_grid(r)?, r.entropy_map()?)))
        .collect::<Result<Vec<_>>>()?;
    KnnEntropyPredictor::train(data, options)
}

/// Saved k-NN configuration. The predictors are retrained from the training
/// split of `manifest` when loaded.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnDescriptor {
    pub manifest: std::path::PathBuf,
    pub k: usize,
    pub epsilon: f64,
}

impl KnnDescriptor {
    pub fn options(&self) -> KnnOptions {
        KnnOptions {
            k: self.k,
            epsilon: self.epsilon,
        }
    }

    /// Relative manifest paths are resolved against `base`.
    pub fn load_manifest(&self, base: &Path) -> Result<Manifest> {
        Manifest::read(&base.join(&self.manifest))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("descriptor serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: KnnDescriptor =
            serde_json::from_str(&text).map_err(|e| Error::format("knn descriptor", e.line(), e.to_string()))?;
        d.options().check()?;
        Ok(d)
    }
}

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub object_id: String,
    pub true_category: String,
    pub predicted_category: String,
    pub true_pose: PoseOffset,
    pub predicted_pose: PoseOffset,
    pub views_used: usize,
}

pub const RESULTS_HEADER: &str = "object_id,true_category,predicted_category,true_d_theta,true_d_phi,predicted_d_theta,predicted_d_phi,views_used";

impl From<&RecognitionOutcome> for ResultRow {
    /// Dataset objects are in their canonical orientation, so the true pose
    /// offset is always zero.
    fn from(o: &RecognitionOutcome) -> Self {
        ResultRow {
            object_id: o.object_id.clone(),
            true_category: o.true_category.clone(),
            predicted_category: o.fused.category.clone(),
            true_pose: PoseOffset::default(),
            predicted_pose: o.fused.pose,
            views_used: o.fused.views_used,
        }
    }
}

pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.object_id.cmp(&b.object_id));
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.object_id,
            r.true_category,
            r.predicted_category,
            r.true_pose.d_theta,
            r.true_pose.d_phi,
            r.predicted_pose.d_theta,
            r.predicted_pose.d_phi,
            r.views_used
        );
    }
    out
}

pub fn results_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let ctx = "results";
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h.trim_end()) != Some(RESULTS_HEADER) {
        return Err(Error::format(ctx, 1, "missing or unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 8 {
            return Err(Error::format(ctx, i + 1, format!("expected 8 columns, found {}", c.len())));
        }
        let int = |s: &str| {
            s.parse::<i32>()
                .map_err(|_| Error::format(ctx, i + 1, format!("bad integer {s:?}")))
        };
        let pose = |t: &str, p: &str| -> Result<PoseOffset> {
            PoseOffset::new(int(t)?, int(p)?).map_err(|e| Error::format(ctx, i + 1, e.to_string()))
        };
        rows.push(ResultRow {
            object_id: c[0].into(),
            true_category: c[1].into(),
            predicted_category: c[2].into(),
            true_pose: pose(c[3], c[4])?,
            predicted_pose: pose(c[5], c[6])?,
            views_used: c[7]
                .parse()
                .map_err(|_| Error::format(ctx, i + 1, format!("bad count {:?}", c[7])))?,
        });
    }
    Ok(rows)
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, results_to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    results_from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
