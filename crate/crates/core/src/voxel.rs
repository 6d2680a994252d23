//! Padded binary occupancy grids built by triangle/box overlap.
//!
//! The unit cube `[-0.5, 0.5]^3` is split into `interior^3` cells and embedded
//! in a grid with `padding` empty voxels on every side. Cell boxes are closed,
//! so a triangle that only touches a cell face still marks that cell.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{cross, sub, Vec3};
use crate::mesh::TriangleMesh;

pub const DEFAULT_INTERIOR: usize = 50;
pub const DEFAULT_PADDING: usize = 3;

const MAGIC: &[u8; 4] = b"VOXG";
const HEADER_LEN: usize = 16;

/// Slack, in cell units, added to every cell box during the overlap test.
const OVERLAP_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelGrid {
    interior: usize,
    padding: usize,
    occupancy: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoxelizeOptions {
    pub interior: usize,
    pub padding: usize,
    /// Also fill the inside of closed surfaces using x-axis parity scanlines.
    pub solid: bool,
}

impl Default for VoxelizeOptions {
    fn default() -> Self {
        VoxelizeOptions {
            interior: DEFAULT_INTERIOR,
            padding: DEFAULT_PADDING,
            solid: false,
        }
    }
}

impl VoxelGrid {
    pub fn empty(interior: usize, padding: usize) -> Self {
        let n = interior + 2 * padding;
        VoxelGrid {
            interior,
            padding,
            occupancy: vec![false; n * n * n],
        }
    }

    /// Edge length of the full grid, `interior + 2 * padding`.
    pub fn dims(&self) -> usize {
        self.interior + 2 * self.padding
    }

    pub fn interior(&self) -> usize {
        self.interior
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let n = self.dims();
        (x * n + y) * n + z
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.occupancy[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.occupancy[i] = value;
    }

    /// Occupancy in x-major order (x slowest, z fastest).
    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    /// True when no voxel of the padding shell is set.
    pub fn padding_is_empty(&self) -> bool {
        let (p, n) = (self.padding, self.dims());
        let inside = |i: usize| i >= p && i < n - p;
        (0..n).all(|x| {
            (0..n).all(|y| {
                (0..n).all(|z| (inside(x) && inside(y) && inside(z)) || !self.get(x, y, z))
            })
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.dims();
        if n > u8::MAX as usize || self.padding > u8::MAX as usize {
            return Err(Error::invalid(format!("grid of {n} voxels per axis does not fit the file header")));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.occupancy.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[n as u8, n as u8, n as u8, self.padding as u8]);
        out.extend_from_slice(&[0u8; 8]);
        for chunk in self.occupancy.chunks(8) {
            let byte = chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (bit, &set)| acc | ((set as u8) << bit));
            out.push(byte);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::format("voxel grid", 0, msg);
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing VOXG header".into()));
        }
        let (nx, ny, nz, padding) = (bytes[4], bytes[5], bytes[6], bytes[7] as usize);
        if nx != ny || ny != nz {
            return Err(bad(format!("non-cubic dims {nx}x{ny}x{nz}")));
        }
        let n = nx as usize;
        if n <= 2 * padding {
            return Err(bad(format!("dims {n} leave no interior with padding {padding}")));
        }
        let total = n * n * n;
        let body = &bytes[HEADER_LEN..];
        if body.len() != total.div_ceil(8) {
            return Err(bad(format!(
                "expected {} data bytes, found {}",
                total.div_ceil(8),
                body.len()
            )));
        }
        let occupancy = (0..total).map(|i| body[i / 8] >> (i % 8) & 1 == 1).collect();
        let grid = VoxelGrid {
            interior: n - 2 * padding,
            padding,
            occupancy,
        };
        if !grid.padding_is_empty() {
            return Err(bad("occupied voxel inside the padding shell".into()));
        }
        Ok(grid)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Separating-axis test between a triangle and the axis-aligned box centred
/// at `center` with half-width `half` on every axis. Touching counts as overlap.
pub fn triangle_box_overlap(tri: [Vec3; 3], center: Vec3, half: f64) -> bool {
    let v = [sub(tri[0], center), sub(tri[1], center), sub(tri[2], center)];

    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half || hi < -half {
            return false;
        }
    }

    let edges = [sub(v[1], v[0]), sub(v[2], v[1]), sub(v[0], v[2])];
    let separated = |axis: Vec3| {
        let p0 = axis[0] * v[0][0] + axis[1] * v[0][1] + axis[2] * v[0][2];
        let p1 = axis[0] * v[1][0] + axis[1] * v[1][1] + axis[2] * v[1][2];
        let p2 = axis[0] * v[2][0] + axis[1] * v[2][1] + axis[2] * v[2][2];
        let r = half * (axis[0].abs() + axis[1].abs() + axis[2].abs());
        p0.min(p1).min(p2) > r || p0.max(p1).max(p2) < -r
    };

    if separated(cross(edges[0], edges[1])) {
        return false;
    }
    const UNIT: [Vec3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for e in &edges {
        for u in &UNIT {
            if separated(cross(*e, *u)) {
                return false;
            }
        }
    }
    true
}

/// Marks every cell whose closed box intersects a triangle of `mesh`.
pub fn voxelize(mesh: &TriangleMesh, options: VoxelizeOptions) -> Result<VoxelGrid> {
    let VoxelizeOptions {
        interior,
        padding,
        solid,
    } = options;
    if interior < 1 {
        return Err(Error::invalid("voxel interior size must be at least 1"));
    }
    mesh.ensure_normalized()?;
    if mesh.faces().is_empty() {
        return Err(Error::DegenerateGeometry("mesh has no faces to voxelize".into()));
    }

    // Work in interior cell units: the unit cube maps to [0, interior]^3 and
    // cell (i, j, k) is the box [i, i+1] x [j, j+1] x [k, k+1].
    let n = interior as f64;
    let to_cells = |p: Vec3| [(p[0] + 0.5) * n, (p[1] + 0.5) * n, (p[2] + 0.5) * n];
    let triangles: Vec<[Vec3; 3]> = (0..mesh.faces().len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            [to_cells(a), to_cells(b), to_cells(c)]
        })
        .collect();

    let cell_range = |lo: f64, hi: f64| {
        let first = ((lo - OVERLAP_EPS).ceil() - 1.0).max(0.0) as usize;
        let last = ((hi + OVERLAP_EPS).floor()).min(n - 1.0).max(0.0) as usize;
        first..=last
    };

    let interior_cells = interior * interior * interior;
    let surface = triangles
        .par_chunks(64)
        .fold(
            || vec![false; interior_cells],
            |mut acc, chunk| {
                for tri in chunk {
                    let axis_range = |a: usize| {
                        let lo = tri[0][a].min(tri[1][a]).min(tri[2][a]);
                        let hi = tri[0][a].max(tri[1][a]).max(tri[2][a]);
                        cell_range(lo, hi)
                    };
                    for x in axis_range(0) {
                        for y in axis_range(1) {
                            for z in axis_range(2) {
                                let cell = (x * interior + y) * interior + z;
                                if acc[cell] {
                                    continue;
                                }
                                let center = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                                if triangle_box_overlap(*tri, center, 0.5 + OVERLAP_EPS) {
                                    acc[cell] = true;
                                }
                            }
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![false; interior_cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x |= y);
                a
            },
        );

    let mut cells = surface;
    if solid {
        fill_parity_x(&triangles, interior, &mut cells);
    }

    let mut grid = VoxelGrid::empty(interior, padding);
    for x in 0..interior {
        for y in 0..interior {
            for z in 0..interior {
                if cells[(x * interior + y) * interior + z] {
                    grid.set(x + padding, y + padding, z + padding, true);
                }
            }
        }
    }
    Ok(grid)
}

/// Fills cells whose centre lies inside the surface, by counting crossings
/// along x through each (y, z) cell-centre line.
fn fill_parity_x(triangles: &[[Vec3; 3]], interior: usize, cells: &mut [bool]) {
    for y in 0..interior {
        for z in 0..interior {
            let (py, pz) = (y as f64 + 0.5, z as f64 + 0.5);
            let mut hits: Vec<f64> = triangles
                .iter()
                .filter_map(|t| crossing_x(t, py, pz))
                .collect();
            hits.sort_by(f64::total_cmp);
            hits.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            for pair in hits.chunks_exact(2) {
                for x in 0..interior {
                    let cx = x as f64 + 0.5;
                    if cx >= pair[0] && cx <= pair[1] {
                        cells[(x * interior + y) * interior + z] = true;
                    }
                }
            }
        }
    }
}

/// x-coordinate where the line `{y = py, z = pz}` crosses the triangle.
fn crossing_x(t: &[Vec3; 3], py: f64, pz: f64) -> Option<f64> {
    let [a, b, c] = *t;
    let det = (b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2]);
    if det == 0.0 {
        return None;
    }
    let u = ((py - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (pz - a[2])) / det;
    let v = ((b[1] - a[1]) * (pz - a[2]) - (py - a[1]) * (b[2] - a[2])) / det;
    if u < 0.0 || v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]))
}

/// Occupancy fractions over `factor^3` blocks of a voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledGrid {
    pub dims: usize,
    pub values: Vec<f64>,
}

pub fn pool_voxels(grid: &VoxelGrid, factor: usize) -> Result<PooledGrid> {
    let n = grid.dims();
    if factor == 0 || n % factor != 0 {
        return Err(Error::invalid(format!(
            "pooling factor {factor} does not divide grid size {n}"
        )));
    }
    let m = n / factor;
    let mut counts = vec![0u32; m * m * m];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if grid.get(x, y, z) {
                    counts[((x / factor) * m + y / factor) * m + z / factor] += 1;
                }
            }
        }
    }
    let block = (factor * factor * factor) as f64;
    Ok(PooledGrid {
        dims: m,
        values: counts.into_iter().map(|c| c as f64 / block).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;

    pub(crate) fn unit_cube_mesh() -> TriangleMesh {
        let v = (0..8)
            .map(|i| {
                [
                    if i & 1 == 0 { -0.5 } else { 0.5 },
                    if i & 2 == 0 { -0.5 } else { 0.5 },
                    if i & 4 == 0 { -0.5 } else { 0.5 },
                ]
            })
            .collect();
        let faces = vec![
            [0, 2, 3], [0, 3, 1], // z-
            [4, 5, 7], [4, 7, 6], // z+
            [0, 1, 5], [0, 5, 4], // y-
            [2, 6, 7], [2, 7, 3], // y+
            [0, 4, 6], [0, 6, 2], // x-
            [1, 3, 7], [1, 7, 5], // x+
        ];
        TriangleMesh::new(v, faces).unwrap()
    }

    #[test]
    fn single_triangle_in_one_cell() {
        // Cell (25, 25, 25) spans [0, 0.02]^3 in model units.
        let m = TriangleMesh::new(
            vec![[0.005, 0.005, 0.01], [0.015, 0.005, 0.01], [0.005, 0.015, 0.01]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let g = voxelize(&m, VoxelizeOptions::default()).unwrap();
        assert_eq!(g.occupied_count(), 1);
        assert!(g.get(28, 28, 28));
    }

    #[test]
    fn cube_shell_count() {
        let g = voxelize(&unit_cube_mesh(), VoxelizeOptions::default()).unwrap();
        assert_eq!(g.dims(), 56);
        assert_eq!(g.occupied_count(), 14_408);
        assert!(g.padding_is_empty());
    }

    #[test]
    fn solid_fill_closes_the_cube() {
        let opts = VoxelizeOptions {
            interior: 10,
            padding: 1,
            solid: true,
        };
        let g = voxelize(&unit_cube_mesh(), opts).unwrap();
        assert_eq!(g.occupied_count(), 1000);
    }

    #[test]
    fn rejects_bad_input() {
        let big = unit_cube_mesh().map_vertices(|v| [v[0] * 2.0, v[1], v[2]]);
        assert!(matches!(
            voxelize(&big, VoxelizeOptions::default()),
            Err(Error::NotNormalized(_))
        ));
        let opts = VoxelizeOptions {
            interior: 0,
            ..Default::default()
        };
        assert!(voxelize(&unit_cube_mesh(), opts).is_err());
    }

    #[test]
    fn pool_examples() {
        let empty = VoxelGrid::empty(50, 3);
        let p = pool_voxels(&empty, 4).unwrap();
        assert_eq!(p.dims, 14);
        assert!(p.values.iter().all(|&v| v == 0.0));

        let mut full = VoxelGrid::empty(50, 3);
        for x in 3..53 {
            for y in 3..53 {
                for z in 3..53 {
                    full.set(x, y, z, true);
                }
            }
        }
        let p = pool_voxels(&full, 56).unwrap();
        assert_eq!(p.values, vec![125_000.0 / 175_616.0]);
        assert!((p.values[0] - 0.7117).abs() < 1e-4);

        assert!(pool_voxels(&empty, 5).is_err());
        assert!(pool_voxels(&empty, 0).is_err());
    }

    #[test]
    fn pool_conserves_cube_shell_mass() {
        let g = voxelize(&unit_cube_mesh(), VoxelizeOptions::default()).unwrap();
        let p = pool_voxels(&g, 4).unwrap();
        let mass: f64 = p.values.iter().sum::<f64>() * 64.0;
        assert!((mass - 14_408.0).abs() < 1e-9);
    }

    #[test]
    fn grid_file_layout() {
        let mut g = VoxelGrid::empty(2, 1);
        g.set(1, 1, 1, true);
        g.set(1, 1, 2, true);
        let bytes = g.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"VOXG\x04\x04\x04\x01");
        assert_eq!(&bytes[8..16], &[0u8; 8]);
        assert_eq!(bytes.len(), 16 + 8);
        // index(1,1,1) = 21, index(1,1,2) = 22 -> byte 2, bits 5 and 6
        assert_eq!(bytes[16 + 2], 0b0110_0000);
        assert_eq!(VoxelGrid::from_bytes(&bytes).unwrap(), g);

        let mut corrupt = bytes.clone();
        corrupt[16] = 1;
        assert!(VoxelGrid::from_bytes(&corrupt).is_err());
        assert!(VoxelGrid::from_bytes(&bytes[..20]).is_err());
        assert!(VoxelGrid::from_bytes(b"VOXX").is_err());
    }
}
