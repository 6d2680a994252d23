use std::path::{Path, PathBuf};

use crate::entropy::EntropyMap;
use crate::error::Result;
use crate::render::DepthImage;
use crate::viewrig::{AZIMUTHS, RINGS};

/// Pixel size of one map cell in the heatmap.
pub const CELL_PIXELS: usize = 20;

/// Rings run down the image and azimuths across it. Values are mapped
/// linearly from the map's own `[min, max]` to `[0, 255]`; a constant map
/// becomes uniform 128.
pub fn heatmap_image(map: &EntropyMap) -> DepthImage {
    let (lo, hi) = map.min_max();
    let level = |v: f64| -> u8 {
        if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round() as u8
        } else {
            128
        }
    };
    let (w, h) = (AZIMUTHS * CELL_PIXELS, RINGS * CELL_PIXELS);
    let mut pixels = vec![0u8; w * h];
    for (r, row) in pixels.chunks_mut(w).enumerate() {
        for (c, p) in row.iter_mut().enumerate() {
            *p = level(map.get(r / CELL_PIXELS, c / CELL_PIXELS));
        }
    }
    DepthImage::new(w, h, pixels).expect("dimensions match")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

/// Writes the heatmap PGM to `path` and the raw values next to it as CSV.
/// Returns the sidecar path.
pub fn emit_heatmap(map: &EntropyMap, path: &Path) -> Result<PathBuf> {
    heatmap_image(map).write_pgm(path)?;
    let csv = sidecar_path(path);
    map.write_csv(&csv)?;
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_mid_gray() {
        let img = heatmap_image(&EntropyMap::from_vector(&[3.25; 60]).unwrap());
        assert_eq!((img.width(), img.height()), (240, 100));
        assert!(img.pixels().iter().all(|&p| p == 128));
    }

    #[test]
    fn single_spike_is_one_block() {
        let mut v = vec![1.0; 60];
        v[12 * 2 + 7] = 4.0;
        let img = heatmap_image(&EntropyMap::from_vector(&v).unwrap());
        for r in 0..100 {
            for c in 0..240 {
                let inside = r / 20 == 2 && c / 20 == 7;
                assert_eq!(img.get(r, c), if inside { 255 } else { 0 }, "({r}, {c})");
            }
        }
    }
}
