//! Dataset manifest: one CSV row per object with its 60 entropies and the
//! paths of its grid and view images, relative to the manifest directory.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::entropy::EntropyMap;
use crate::error::{Error, Result};
use crate::render::DepthImage;
use crate::viewrig::VIEW_COUNT;
use crate::voxel::VoxelGrid;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub object_id: String,
    pub category: String,
    pub split: Split,
    pub voxel_path: String,
    /// Index-aligned with the rig convention.
    pub entropies: Vec<f64>,
    pub view_paths: Vec<String>,
}

impl DatasetRecord {
    pub fn entropy_map(&self) -> Result<EntropyMap> {
        EntropyMap::from_vector(&self.entropies)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    /// Directory the relative paths are resolved against.
    pub root: PathBuf,
    pub records: Vec<DatasetRecord>,
}

pub fn header() -> String {
    let mut h = String::from("object_id,category,split,voxel_path");
    for i in 0..VIEW_COUNT {
        let _ = write!(h, ",entropy_{i:02}");
    }
    for i in 0..VIEW_COUNT {
        let _ = write!(h, ",view_{i:02}");
    }
    h
}

fn check_field(field: &str, what: &str) -> Result<()> {
    if field.is_empty() || field.contains([',', '"', '\n', '\r']) {
        return Err(Error::invalid(format!("{what} {field:?} cannot be stored in a manifest")));
    }
    Ok(())
}

impl Manifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn load_grid(&self, record: &DatasetRecord) -> Result<VoxelGrid> {
        VoxelGrid::read(&self.resolve(&record.voxel_path))
    }

    pub fn load_view(&self, record: &DatasetRecord, index: usize) -> Result<DepthImage> {
        let rel = record
            .view_paths
            .get(index)
            .ok_or_else(|| Error::invalid(format!("view index {index} outside 0..60")))?;
        DepthImage::read_pgm(&self.resolve(rel))
    }

    pub fn find(&self, object_id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.object_id == object_id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = header();
        out.push('\n');
        for r in &self.records {
            check_field(&r.object_id, "object id")?;
            check_field(&r.category, "category")?;
            check_field(&r.voxel_path, "path")?;
            if r.entropies.len() != VIEW_COUNT || r.view_paths.len() != VIEW_COUNT {
                return Err(Error::invalid(format!(
                    "record {} needs {VIEW_COUNT} entropies and view paths",
                    r.object_id
                )));
            }
            let _ = write!(out, "{},{},{},{}", r.object_id, r.category, r.split, r.voxel_path);
            for e in &r.entropies {
                let _ = write!(out, ",{e:?}");
            }
            for p in &r.view_paths {
                check_field(p, "path")?;
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str, root: PathBuf) -> Result<Self> {
        let ctx = "manifest";
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == header() => {}
            _ => return Err(Error::format(ctx, 1, "missing or unexpected header")),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 4 + 2 * VIEW_COUNT {
                return Err(Error::format(
                    ctx,
                    line_no,
                    format!("expected {} columns, found {}", 4 + 2 * VIEW_COUNT, cells.len()),
                ));
            }
            let entropies = cells[4..4 + VIEW_COUNT]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite() && *v >= 0.0)
                        .ok_or_else(|| Error::format(ctx, line_no, format!("bad entropy {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(DatasetRecord {
                object_id: cells[0].to_string(),
                category: cells[1].to_string(),
                split: cells[2]
                    .parse()
                    .map_err(|e: Error| Error::format(ctx, line_no, e.to_string()))?,
                voxel_path: cells[3].to_string(),
                entropies,
                view_paths: cells[4 + VIEW_COUNT..].iter().map(|s| s.to_string()).collect(),
            });
        }
        Ok(Manifest { root, records })
    }

    /// Reads `path`, resolving record paths against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}
