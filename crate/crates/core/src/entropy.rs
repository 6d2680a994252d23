//! Viewpoint entropy, the 5x12 entropy map and best-view peak selection.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::render::DepthImage;
use crate::viewrig::{AZIMUTHS, RINGS, VIEW_COUNT};

/// Shannon entropy, in bits, of the 256-bin histogram of pixel codes.
/// Background pixels (code 0) count like any other code.
pub fn image_entropy(image: &DepthImage) -> f64 {
    let mut hist = [0u64; 256];
    for &p in image.pixels() {
        hist[p as usize] += 1;
    }
    let total = image.pixels().len() as f64;
    if total == 0.0 {
        return 0.0;
    }
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // A single-symbol histogram gives -1 * log2(1) = -0.0.
    h.max(0.0)
}

/// Entropy values over the rig: row = ring, column = azimuth.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyMap {
    values: [[f64; AZIMUTHS]; RINGS],
}

impl EntropyMap {
    pub fn new(values: [[f64; AZIMUTHS]; RINGS]) -> Result<Self> {
        for (k, row) in values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!(
                        "entropy at ({k}, {j}) must be finite and >= 0, got {v}"
                    )));
                }
            }
        }
        Ok(EntropyMap { values })
    }

    /// Builds a map from 60 values in viewpoint-index order.
    pub fn from_vector(values: &[f64]) -> Result<Self> {
        if values.len() != VIEW_COUNT {
            return Err(Error::invalid(format!(
                "entropy vector needs {VIEW_COUNT} values, got {}",
                values.len()
            )));
        }
        let mut grid = [[0.0; AZIMUTHS]; RINGS];
        for (i, &v) in values.iter().enumerate() {
            grid[i / AZIMUTHS][i % AZIMUTHS] = v;
        }
        Self::new(grid)
    }

    pub fn zeros() -> Self {
        EntropyMap {
            values: [[0.0; AZIMUTHS]; RINGS],
        }
    }

    pub fn get(&self, ring: usize, azimuth: usize) -> f64 {
        self.values[ring][azimuth]
    }

    pub fn rows(&self) -> &[[f64; AZIMUTHS]; RINGS] {
        &self.values
    }

    /// Values in viewpoint-index order.
    pub fn to_vector(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Cyclic column shift: the value at azimuth `j` moves to `j + shift`.
    pub fn roll_azimuth(&self, shift: usize) -> EntropyMap {
        let mut values = [[0.0; AZIMUTHS]; RINGS];
        for k in 0..RINGS {
            for j in 0..AZIMUTHS {
                values[k][(j + shift) % AZIMUTHS] = self.values[k][j];
            }
        }
        EntropyMap { values }
    }

    /// Five lines of twelve comma-separated values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.len() != RINGS {
            return Err(Error::format("entropy map", rows.len(), format!("expected {RINGS} rows")));
        }
        let mut values = [[0.0; AZIMUTHS]; RINGS];
        for (k, row) in rows.iter().enumerate() {
            let cells: Vec<&str> = row.split(',').map(str::trim).collect();
            if cells.len() != AZIMUTHS {
                return Err(Error::format(
                    "entropy map",
                    k + 1,
                    format!("expected {AZIMUTHS} columns, found {}", cells.len()),
                ));
            }
            for (j, cell) in cells.iter().enumerate() {
                values[k][j] = cell
                    .parse()
                    .map_err(|_| Error::format("entropy map", k + 1, format!("bad number {cell:?}")))?;
            }
        }
        Self::new(values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

pub fn entropy_map_from_views(images: &[DepthImage]) -> Result<EntropyMap> {
    if images.len() != VIEW_COUNT {
        return Err(Error::invalid(format!(
            "entropy map needs {VIEW_COUNT} views, got {}",
            images.len()
        )));
    }
    let values: Vec<f64> = images.iter().map(image_entropy).collect();
    EntropyMap::from_vector(&values)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub ring: usize,
    pub azimuth: usize,
    pub value: f64,
}

impl Peak {
    pub fn view_index(&self) -> usize {
        self.ring * AZIMUTHS + self.azimuth
    }
}

/// 8-neighbourhood with azimuth wrap-around and clamped rings.
fn neighbours(k: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1i64..=1).flat_map(move |dk| {
        (-1i64..=1).filter_map(move |dj| {
            let nk = k as i64 + dk;
            if (dk == 0 && dj == 0) || nk < 0 || nk >= RINGS as i64 {
                return None;
            }
            let nj = (j as i64 + dj).rem_euclid(AZIMUTHS as i64) as usize;
            Some((nk as usize, nj))
        })
    })
}

/// Local maxima of the map.
///
/// Equal-valued connected cells form a plateau. A plateau is a peak when none
/// of its cells has a strictly larger neighbour and it does not cover the
/// whole map; it is reported once, at its lexicographically smallest cell. A
/// constant map yields the single peak `(0, 0)`. Output is sorted by value
/// descending, ties by `(ring, azimuth)`.
pub fn find_peaks(map: &EntropyMap) -> Vec<Peak> {
    const UNSET: usize = usize::MAX;
    let mut label = [[UNSET; AZIMUTHS]; RINGS];
    let mut peaks = Vec::new();
    let mut stack = Vec::new();
    let mut plateau = 0;

    for k in 0..RINGS {
        for j in 0..AZIMUTHS {
            if label[k][j] != UNSET {
                continue;
            }
            // Row-major scan: the first cell reached is the smallest one.
            let value = map.values[k][j];
            let mut dominated = false;
            let mut size = 0;
            label[k][j] = plateau;
            stack.push((k, j));
            while let Some((ck, cj)) = stack.pop() {
                size += 1;
                for (nk, nj) in neighbours(ck, cj) {
                    let nv = map.values[nk][nj];
                    if nv == value {
                        if label[nk][nj] == UNSET {
                            label[nk][nj] = plateau;
                            stack.push((nk, nj));
                        }
                    } else if nv > value {
                        dominated = true;
                    }
                }
            }
            if !dominated && size < VIEW_COUNT {
                peaks.push(Peak {
                    ring: k,
                    azimuth: j,
                    value,
                });
            }
            plateau += 1;
        }
    }

    if plateau == 1 {
        return vec![Peak {
            ring: 0,
            azimuth: 0,
            value: map.values[0][0],
        }];
    }
    peaks.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then((a.ring, a.azimuth).cmp(&(b.ring, b.azimuth)))
    });
    peaks
}

/// The first `min(n, peak count)` peaks.
pub fn top_n_views(map: &EntropyMap, n: usize) -> Result<Vec<Peak>> {
    if n < 1 {
        return Err(Error::invalid("number of views must be at least 1"));
    }
    let mut peaks = find_peaks(map);
    peaks.truncate(n);
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_with(codes: &[(u8, usize)]) -> DepthImage {
        let mut px = Vec::new();
        for &(c, n) in codes {
            px.extend(std::iter::repeat_n(c, n));
        }
        DepthImage::new(224, 224, px).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let n = 224 * 224;
        assert_eq!(image_entropy(&image_with(&[(0, n)])), 0.0);
        assert!((image_entropy(&image_with(&[(0, n / 2), (128, n / 2)])) - 1.0).abs() < 1e-12);
        let q = n / 4;
        let four = image_with(&[(0, q), (60, q), (120, q), (250, q)]);
        assert!((image_entropy(&four) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn map_from_views_uses_index_convention() {
        let blank = DepthImage::blank(224, 224);
        let mut views = vec![blank.clone(); 60];
        assert_eq!(entropy_map_from_views(&views).unwrap(), EntropyMap::zeros());
        let n = 224 * 224;
        views[17] = image_with(&[(0, n / 2), (128, n / 2)]);
        let map = entropy_map_from_views(&views).unwrap();
        for k in 0..RINGS {
            for j in 0..AZIMUTHS {
                let want = if (k, j) == (1, 5) { 1.0 } else { 0.0 };
                assert!((map.get(k, j) - want).abs() < 1e-12);
            }
        }
        assert!(entropy_map_from_views(&views[..59]).is_err());
    }

    #[test]
    fn map_rejects_invalid_values() {
        let mut v = vec![0.0; 60];
        v[3] = -0.1;
        assert!(EntropyMap::from_vector(&v).is_err());
        v[3] = f64::NAN;
        assert!(EntropyMap::from_vector(&v).is_err());
        assert!(EntropyMap::from_vector(&v[..10]).is_err());
    }

    fn spike(cells: &[((usize, usize), f64)]) -> EntropyMap {
        let mut v = [[0.0; AZIMUTHS]; RINGS];
        for &((k, j), x) in cells {
            v[k][j] = x;
        }
        EntropyMap::new(v).unwrap()
    }

    #[test]
    fn single_spike() {
        let peaks = find_peaks(&spike(&[((2, 5), 1.0)]));
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].ring, peaks[0].azimuth), (2, 5));
    }

    #[test]
    fn wrap_around_dominance() {
        let peaks = find_peaks(&spike(&[((2, 0), 1.0), ((2, 11), 2.0)]));
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].ring, peaks[0].azimuth, peaks[0].value), (2, 11, 2.0));
    }

    #[test]
    fn rows_do_not_wrap() {
        let peaks = find_peaks(&spike(&[((0, 3), 1.0), ((4, 3), 2.0)]));
        assert_eq!(peaks.len(), 2);
    }

    #[test]
    fn constant_map_has_one_peak() {
        let map = EntropyMap::new([[3.25; AZIMUTHS]; RINGS]).unwrap();
        let peaks = find_peaks(&map);
        assert_eq!(peaks, vec![Peak { ring: 0, azimuth: 0, value: 3.25 }]);
    }

    #[test]
    fn plateau_reported_once_at_smallest_cell() {
        let peaks = find_peaks(&spike(&[((1, 11), 1.0), ((1, 0), 1.0), ((2, 0), 1.0)]));
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].ring, peaks[0].azimuth), (1, 0));
    }

    #[test]
    fn top_n() {
        let map = spike(&[((0, 0), 1.0), ((2, 4), 3.0), ((4, 8), 2.0)]);
        let v = top_n_views(&map, 5).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.iter().map(|p| p.value).collect::<Vec<_>>(), vec![3.0, 2.0, 1.0]);
        assert_eq!(top_n_views(&map, 1).unwrap()[0].view_index(), 28);
        assert!(top_n_views(&map, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let v: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin().abs() * 7.0 + 1e-17).collect();
        let map = EntropyMap::from_vector(&v).unwrap();
        assert_eq!(EntropyMap::from_csv(&map.to_csv()).unwrap(), map);
        assert!(EntropyMap::from_csv("1,2\n").is_err());
    }
}
