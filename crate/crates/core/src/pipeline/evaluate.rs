use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::manifest::{Manifest, Split};
use super::recognize::ResultRow;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingSummary {
    pub objects: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

impl TimingSummary {
    pub fn from_seconds(seconds: &[f64]) -> Option<Self> {
        if seconds.is_empty() {
            return None;
        }
        let n = seconds.len() as f64;
        let mean = seconds.iter().sum::<f64>() / n;
        let var = seconds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        Some(TimingSummary {
            objects: seconds.len(),
            mean_seconds: mean,
            std_seconds: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub objects: usize,
    pub class_accuracy: f64,
    pub pose_accuracy: f64,
    /// Categories indexing the confusion matrix rows (true) and columns (predicted).
    pub categories: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    /// Number of fused views per object, grouped by true category.
    pub views_used: BTreeMap<String, Vec<usize>>,
    pub mean_views: f64,
    #[serde(skip)]
    pub timing: Option<TimingSummary>,
}

/// Scores fused results against the test split of `manifest`. Every test
/// object must have exactly one result and every result must name a test
/// object of the same category.
pub fn evaluate(rows: &[ResultRow], manifest: &Manifest) -> Result<EvaluationReport> {
    let tests: BTreeMap<&str, &str> = manifest
        .split(Split::Test)
        .map(|r| (r.object_id.as_str(), r.category.as_str()))
        .collect();
    let mut seen = BTreeSet::new();
    for r in rows {
        match tests.get(r.object_id.as_str()) {
            None => {
                return Err(Error::Mismatch(format!(
                    "result for {} has no test record in the manifest",
                    r.object_id
                )))
            }
            Some(&c) if c != r.true_category => {
                return Err(Error::Mismatch(format!(
                    "{}: result says category {}, manifest says {c}",
                    r.object_id, r.true_category
                )))
            }
            _ => {}
        }
        if !seen.insert(r.object_id.as_str()) {
            return Err(Error::Mismatch(format!("duplicate result for {}", r.object_id)));
        }
    }
    if let Some(missing) = tests.keys().find(|id| !seen.contains(*id)) {
        return Err(Error::Mismatch(format!("no result for test object {missing}")));
    }
    if rows.is_empty() {
        return Err(Error::Mismatch("no test objects to evaluate".into()));
    }

    let categories: Vec<String> = rows
        .iter()
        .flat_map(|r| [r.true_category.clone(), r.predicted_category.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = |c: &str| categories.binary_search_by(|x| x.as_str().cmp(c)).expect("collected");
    let mut confusion = vec![vec![0usize; categories.len()]; categories.len()];
    let mut views_used: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let (mut class_ok, mut pose_ok) = (0usize, 0usize);

    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.object_id.cmp(&b.object_id));
    for r in &sorted {
        confusion[idx(&r.true_category)][idx(&r.predicted_category)] += 1;
        class_ok += (r.true_category == r.predicted_category) as usize;
        pose_ok += (r.true_pose == r.predicted_pose) as usize;
        views_used
            .entry(r.true_category.clone())
            .or_default()
            .push(r.views_used);
    }
    let n = rows.len() as f64;
    Ok(EvaluationReport {
        objects: rows.len(),
        class_accuracy: class_ok as f64 / n,
        pose_accuracy: pose_ok as f64 / n,
        categories,
        confusion,
        mean_views: rows.iter().map(|r| r.views_used as f64).sum::<f64>() / n,
        views_used,
        timing: None,
    })
}

impl EvaluationReport {
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("true\\predicted,{}\n", self.categories.join(","));
        for (c, row) in self.categories.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{c},{}", cells.join(","));
        }
        out
    }

    /// One row per object: category and the number of views it used.
    pub fn views_csv(&self) -> String {
        let mut out = String::from("category,views_used\n");
        for (c, counts) in &self.views_used {
            for v in counts {
                let _ = writeln!(out, "{c},{v}");
            }
        }
        out
    }

    /// Writes `report.json`, `confusion.csv`, `views_used.csv` and, when
    /// timings are known, `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        let files = [
            ("report.json", json + "\n"),
            ("confusion.csv", self.confusion_csv()),
            ("views_used.csv", self.views_csv()),
        ];
        for (name, content) in files {
            let p = dir.join(name);
            std::fs::write(&p, content).map_err(|e| Error::io(&p, e))?;
        }
        if let Some(t) = &self.timing {
            let p = dir.join("timing.json");
            let json = serde_json::to_string_pretty(t).expect("timing serializes");
            std::fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::PoseOffset;
    use crate::pipeline::manifest::DatasetRecord;

    fn manifest(ids: &[(&str, &str)]) -> Manifest {
        Manifest {
            root: Default::default(),
            records: ids
                .iter()
                .map(|(id, c)| DatasetRecord {
                    object_id: id.to_string(),
                    category: c.to_string(),
                    split: Split::Test,
                    voxel_path: String::new(),
                    entropies: vec![0.0; 60],
                    view_paths: vec![String::new(); 60],
                })
                .collect(),
        }
    }

    fn row(id: &str, t: &str, p: &str, pose: i32) -> ResultRow {
        ResultRow {
            object_id: id.into(),
            true_category: t.into(),
            predicted_category: p.into(),
            true_pose: PoseOffset::default(),
            predicted_pose: PoseOffset { d_theta: pose, d_phi: 0 },
            views_used: 3,
        }
    }

    #[test]
    fn perfect_and_one_wrong() {
        let m = manifest(&[("a", "box"), ("b", "box"), ("c", "cone"), ("d", "cone")]);
        let good = vec![row("a", "box", "box", 0), row("b", "box", "box", 0), row("c", "cone", "cone", 0), row("d", "cone", "cone", 0)];
        let r = evaluate(&good, &m).unwrap();
        assert_eq!((r.class_accuracy, r.pose_accuracy), (1.0, 1.0));

        let mut one = good.clone();
        one[2] = row("c", "cone", "box", 30);
        let r = evaluate(&one, &m).unwrap();
        assert_eq!(r.class_accuracy, 0.75);
        assert_eq!(r.pose_accuracy, 0.75);
        assert_eq!(r.confusion, vec![vec![2, 0], vec![1, 1]]);
        let sums: Vec<usize> = r.confusion.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(sums, vec![2, 2]);

        one.reverse();
        assert_eq!(evaluate(&one, &m).unwrap(), r);
    }

    #[test]
    fn mismatches() {
        let m = manifest(&[("a", "box"), ("b", "cone")]);
        assert!(evaluate(&[row("a", "box", "box", 0)], &m).is_err());
        assert!(evaluate(&[row("a", "box", "box", 0), row("z", "cone", "cone", 0)], &m).is_err());
        assert!(evaluate(&[row("a", "cone", "box", 0), row("b", "cone", "cone", 0)], &m).is_err());
    }
}
