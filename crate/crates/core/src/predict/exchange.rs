//! JSON-lines exchange of per-view predictions from external models.
//!
//! One record per line:
//! `{"object_id": "...", "view_index": 0..59, "class_scores": {...}, "viewpoint_scores": [60 numbers]}`

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ViewPrediction, ViewPredictor};
use crate::error::{Error, Result};
use crate::render::DepthImage;
use crate::viewrig::VIEW_COUNT;

/// Allowed deviation of a score-vector sum from 1 in exchange files.
pub const FILE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub object_id: String,
    pub view_index: usize,
    pub class_scores: BTreeMap<String, f64>,
    pub viewpoint_scores: Vec<f64>,
}

impl PredictionRecord {
    pub fn new(object_id: impl Into<String>, view_index: usize, prediction: ViewPrediction) -> Self {
        PredictionRecord {
            object_id: object_id.into(),
            view_index,
            class_scores: prediction.class_scores,
            viewpoint_scores: prediction.viewpoint_scores,
        }
    }

    pub fn prediction(&self) -> ViewPrediction {
        ViewPrediction {
            class_scores: self.class_scores.clone(),
            viewpoint_scores: self.viewpoint_scores.clone(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.view_index >= VIEW_COUNT {
            return Err(format!("view_index {} outside 0..60", self.view_index));
        }
        if self.viewpoint_scores.len() != VIEW_COUNT {
            return Err(format!(
                "object {} view {}: viewpoint_scores has {} entries, expected {VIEW_COUNT}",
                self.object_id,
                self.view_index,
                self.viewpoint_scores.len()
            ));
        }
        self.prediction()
            .validate(FILE_SUM_TOLERANCE)
            .map_err(|e| format!("object {} view {}: {e}", self.object_id, self.view_index))
    }
}

pub fn read_predictions_from(reader: impl BufRead) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::format("predictions", line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format("predictions", line_no, e.to_string()))?;
        record
            .validate()
            .map_err(|m| Error::format("predictions", line_no, m))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_predictions_to(records: &[PredictionRecord], mut writer: impl Write) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|m| Error::format("predictions", i + 1, m))?;
        let line = serde_json::to_string(r).map_err(|e| Error::format("predictions", i + 1, e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| Error::format("predictions", i + 1, e.to_string()))?;
    }
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(std::io::BufReader::new(file))
}

pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_predictions_to(records, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Predictions looked up by `(object_id, view_index)` instead of computed.
#[derive(Clone, Debug, Default)]
pub struct PredictionTable {
    by_view: HashMap<(String, usize), ViewPrediction>,
}

impl PredictionTable {
    pub fn new(records: Vec<PredictionRecord>) -> Result<Self> {
        let mut by_view = HashMap::with_capacity(records.len());
        for r in records {
            let key = (r.object_id.clone(), r.view_index);
            if by_view.insert(key, r.prediction()).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate prediction for object {} view {}",
                    r.object_id, r.view_index
                )));
            }
        }
        Ok(PredictionTable { by_view })
    }

    pub fn get(&self, object_id: &str, view_index: usize) -> Option<&ViewPrediction> {
        self.by_view.get(&(object_id.to_string(), view_index))
    }
}

/// Source of per-view predictions during recognition.
pub enum ViewSource<'a> {
    Model(&'a dyn ViewPredictor),
    Table(&'a PredictionTable),
}

impl ViewSource<'_> {
    pub fn predict(
        &self,
        object_id: &str,
        view_index: usize,
        image: impl FnOnce() -> Result<DepthImage>,
    ) -> Result<ViewPrediction> {
        match self {
            ViewSource::Model(m) => Ok(m.predict(&image()?)),
            ViewSource::Table(t) => t.get(object_id, view_index).cloned().ok_or_else(|| {
                Error::Mismatch(format!(
                    "no exchange record for object {object_id} view {view_index}"
                ))
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> PredictionRecord {
        let mut v = vec![0.0; 60];
        v[13] = 0.7;
        v[14] = 0.3;
        PredictionRecord {
            object_id: "chair_0001".into(),
            view_index: 13,
            class_scores: [("chair".to_string(), 0.9), ("table".to_string(), 0.1)].into(),
            viewpoint_scores: v,
        }
    }

    #[test]
    fn round_trip() {
        let recs = vec![record(), PredictionRecord { view_index: 2, ..record() }];
        let mut buf = Vec::new();
        write_predictions_to(&recs, &mut buf).unwrap();
        assert_eq!(read_predictions_from(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn short_viewpoint_vector_rejected() {
        let mut r = record();
        r.viewpoint_scores.truncate(59);
        let line = serde_json::to_string(&r).unwrap();
        let text = format!("{}\n{line}\n", serde_json::to_string(&record()).unwrap());
        match read_predictions_from(text.as_bytes()) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("59"), "{message}");
                assert!(message.contains("view 13"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_scores_rejected() {
        let mut r = record();
        r.class_scores.insert("table".into(), -0.1);
        let text = serde_json::to_string(&r).unwrap();
        assert!(read_predictions_from(text.as_bytes()).is_err());

        let mut r = record();
        r.viewpoint_scores[0] = 0.01;
        let text = serde_json::to_string(&r).unwrap();
        assert!(read_predictions_from(text.as_bytes()).is_err());

        assert!(read_predictions_from("{\"object_id\": 3}".as_bytes()).is_err());
        let mut extra = serde_json::to_string(&record()).unwrap();
        extra.insert_str(extra.len() - 1, ",\"x\":1");
        assert!(read_predictions_from(extra.as_bytes()).is_err());
    }

    #[test]
    fn table_lookup_and_duplicates() {
        let t = PredictionTable::new(vec![record()]).unwrap();
        assert!(t.get("chair_0001", 13).is_some());
        assert!(t.get("chair_0001", 12).is_none());
        assert!(PredictionTable::new(vec![record(), record()]).is_err());
    }
}
