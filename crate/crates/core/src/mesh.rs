//! Triangle meshes: OFF parsing, unit-cube normalization and vertex noise.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{sin_cos_30, Vec3};

/// Slack allowed when checking that a mesh lies inside the unit cube.
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;

/// Indexed triangle mesh. Coordinates are finite and every face index is in
/// range; both are checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn extent(&self) -> Vec3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> Vec3 {
        [
            (self.min[0] + self.max[0]) * 0.5,
            (self.min[1] + self.max[1]) * 0.5,
            (self.min[2] + self.max[2]) * 0.5,
        ]
    }
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().position(|f| f.iter().any(|&i| i as usize >= n)) {
            return Err(Error::invalid(format!(
                "face {f} references a vertex outside 0..{n}"
            )));
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        let first = *self.vertices.first()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for v in &self.vertices[1..] {
            for a in 0..3 {
                bb.min[a] = bb.min[a].min(v[a]);
                bb.max[a] = bb.max[a].max(v[a]);
            }
        }
        Some(bb)
    }

    /// True when every vertex lies in `[-0.5, 0.5]^3` up to
    /// [`NORMALIZED_TOLERANCE`]. A mesh without vertices is trivially inside.
    pub fn is_normalized(&self) -> bool {
        self.ensure_normalized().is_ok()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let Some(bb) = self.bounding_box() else {
            return Ok(());
        };
        let limit = 0.5 + NORMALIZED_TOLERANCE;
        for a in 0..3 {
            if bb.min[a] < -limit || bb.max[a] > limit {
                return Err(Error::NotNormalized(format!(
                    "axis {a} spans [{}, {}]",
                    bb.min[a], bb.max[a]
                )));
            }
        }
        Ok(())
    }

    /// Applies `f` to every vertex, keeping the topology.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Rotates about +z by `steps * 30` degrees (counterclockwise seen from +z).
    pub fn rotate_yaw_steps(&self, steps: i64) -> TriangleMesh {
        let (s, c) = sin_cos_30(steps);
        self.map_vertices(|[x, y, z]| [c * x - s * y, s * x + c * y, z])
    }

    pub fn to_off(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "OFF\n{} {} 0", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
        }
        out
    }
}

pub fn read_off(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text)
}

pub fn write_off(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh.to_off()).map_err(|e| Error::io(path, e))
}

/// Parses an ASCII OFF file. Comments start with `#`; the counts may share
/// the header line (`OFF 8 6 0` or the fused `OFF8 6 0`). Polygons with more
/// than three corners are fan-triangulated around their first corner.
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let err = |line: usize, message: String| Error::OffParse { line, message };

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty input, expected OFF header".into()))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| err(header_line, format!("expected OFF header, found {header:?}")))?;
    let (counts_line, counts) = if rest.trim().is_empty() {
        lines
            .next()
            .ok_or_else(|| err(header_line + 1, "missing counts line".into()))?
    } else {
        (header_line, rest.trim())
    };

    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| err(counts_line, format!("non-numeric count {t:?}")))
        })
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(err(counts_line, "counts line needs vertex and face counts".into()));
    }
    let (n_vertices, n_faces) = (counts[0], counts[1]);

    let mut last_line = counts_line;
    let mut vertices = Vec::with_capacity(n_vertices);
    for read in 0..n_vertices {
        let (line, content) = lines.next().ok_or_else(|| {
            err(
                last_line + 1,
                format!("count mismatch: declared {n_vertices} vertices, found {read}"),
            )
        })?;
        last_line = line;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(err(line, format!("vertex needs 3 coordinates, found {}", tokens.len())));
        }
        let mut v = [0.0; 3];
        for (slot, tok) in v.iter_mut().zip(&tokens) {
            *slot = tok
                .parse::<f64>()
                .map_err(|_| err(line, format!("non-numeric coordinate {tok:?}")))?;
            if !slot.is_finite() {
                return Err(err(line, format!("non-finite coordinate {tok:?}")));
            }
        }
        vertices.push(v);
    }

    let mut faces = Vec::with_capacity(n_faces);
    for read in 0..n_faces {
        let (line, content) = lines.next().ok_or_else(|| {
            err(
                last_line + 1,
                format!(
                    "count mismatch: declared {n_vertices} vertices and {n_faces} faces, \
                     input ended after {read} faces"
                ),
            )
        })?;
        last_line = line;
        let mut tokens = content.split_whitespace();
        let arity_tok = tokens.next().unwrap_or_default();
        let arity: usize = arity_tok
            .parse()
            .map_err(|_| err(line, format!("non-numeric polygon size {arity_tok:?}")))?;
        if arity < 3 {
            return Err(err(line, format!("polygon with {arity} vertices")));
        }
        let mut corners = Vec::with_capacity(arity);
        for _ in 0..arity {
            let tok = tokens
                .next()
                .ok_or_else(|| err(line, format!("polygon declares {arity} vertices, fewer listed")))?;
            let idx: usize = tok
                .parse()
                .map_err(|_| err(line, format!("non-numeric vertex index {tok:?}")))?;
            if idx >= n_vertices {
                return Err(err(
                    line,
                    format!("vertex index {idx} out of range (vertex count {n_vertices})"),
                ));
            }
            corners.push(idx as u32);
        }
        for i in 1..arity - 1 {
            faces.push([corners[0], corners[i], corners[i + 1]]);
        }
    }

    if let Some((line, _)) = lines.next() {
        return Err(err(
            line,
            format!("count mismatch: data beyond the declared {n_vertices} vertices and {n_faces} faces"),
        ));
    }

    TriangleMesh::new(vertices, faces)
}

/// Uniform scale and translation so that the largest bounding-box extent is
/// 1 and the bounding-box center sits at the origin.
pub fn normalize_to_unit_cube(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let bb = mesh
        .bounding_box()
        .ok_or_else(|| Error::DegenerateGeometry("mesh has no vertices".into()))?;
    let e = bb.extent();
    let largest = e[0].max(e[1]).max(e[2]);
    if !(largest > 0.0) {
        return Err(Error::DegenerateGeometry(
            "bounding box has zero extent".into(),
        ));
    }
    let c = bb.center();
    Ok(mesh.map_vertices(|v| {
        [
            (v[0] - c[0]) / largest,
            (v[1] - c[1]) / largest,
            (v[2] - c[2]) / largest,
        ]
    }))
}

/// Perturbs every coordinate with an independent `N(0, sigma^2)` sample.
/// The stream is a ChaCha8 generator seeded with `seed`, consumed in vertex
/// order x, y, z.
pub fn add_gaussian_noise(mesh: &TriangleMesh, sigma: f64, seed: u64) -> Result<TriangleMesh> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(mesh.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            let mut out = *v;
            for c in &mut out {
                *c += normal.sample(&mut rng);
            }
            out
        })
        .collect();
    Ok(TriangleMesh {
        vertices,
        faces: mesh.faces.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push([
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ]);
        }
        TriangleMesh::new(v, vec![[0, 1, 3], [0, 3, 2], [4, 5, 7], [4, 7, 6]]).unwrap()
    }

    #[test]
    fn minimal_triangle() {
        let m = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert_eq!(m.vertices().len(), 3);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn fused_header_and_comments() {
        let text = "# exported\nOFF3 1 0\n0 0 0 # origin\n1 0 0\n\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_off(text).unwrap().faces().len(), 1);
        let spaced = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_off(spaced).unwrap().faces().len(), 1);
    }

    #[test]
    fn declared_vertex_count_exceeds_listing() {
        let mut text = String::from("OFF\n8 1 0\n");
        for i in 0..7 {
            text.push_str(&format!("{i} 0 0\n"));
        }
        text.push_str("3 0 1 2\n");
        match parse_off(&text) {
            Err(Error::OffParse { line, message }) => {
                assert_eq!(line, 11);
                assert!(message.contains("count mismatch"), "{message}");
            }
            other => panic!("expected count mismatch, got {other:?}"),
        }
    }

    #[test]
    fn error_paths_report_lines() {
        let cases = [
            ("PLY\n3 1 0\n", 1),
            ("OFF\n3 x 0\n", 2),
            ("OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n", 4),
            ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", 6),
            ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n2 0 1\n", 6),
            ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 0 1 2\n", 7),
            ("OFF\n3 1 0\n0 0 0\n1 0 inf\n0 1 0\n3 0 1 2\n", 4),
        ];
        for (text, want) in cases {
            match parse_off(text) {
                Err(Error::OffParse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn off_round_trip() {
        let m = box_mesh([-0.5, -0.25, -0.125], [0.5, 0.25, 0.125]);
        assert_eq!(parse_off(&m.to_off()).unwrap(), m);
    }

    #[test]
    fn normalize_cube() {
        let m = normalize_to_unit_cube(&box_mesh([-2.0; 3], [4.0; 3])).unwrap();
        let bb = m.bounding_box().unwrap();
        assert_eq!(bb.min, [-0.5; 3]);
        assert_eq!(bb.max, [0.5; 3]);
    }

    #[test]
    fn normalize_preserves_aspect() {
        let m = normalize_to_unit_cube(&box_mesh([1.0, 1.0, 1.0], [3.0, 2.0, 1.5])).unwrap();
        let bb = m.bounding_box().unwrap();
        assert_eq!(bb.extent(), [1.0, 0.5, 0.25]);
        assert_eq!(bb.center(), [0.0; 3]);
    }

    #[test]
    fn normalize_rejects_point_cloud_collapse() {
        let m = TriangleMesh::new(vec![[1.0, 2.0, 3.0]; 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            normalize_to_unit_cube(&m),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn noise_zero_sigma_is_identity_and_negative_rejected() {
        let m = box_mesh([-0.5; 3], [0.5; 3]);
        assert_eq!(add_gaussian_noise(&m, 0.0, 9).unwrap(), m);
        assert!(add_gaussian_noise(&m, -0.1, 9).is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let m = box_mesh([-0.5; 3], [0.5; 3]);
        let a = add_gaussian_noise(&m, 0.10, 42).unwrap();
        let b = add_gaussian_noise(&m, 0.10, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_gaussian_noise(&m, 0.10, 43).unwrap());
    }

    #[test]
    fn noise_sample_std_matches_sigma() {
        let vertices: Vec<Vec3> = (0..1000).map(|i| [i as f64 * 1e-3 - 0.5, 0.0, 0.0]).collect();
        let m = TriangleMesh::new(vertices, vec![[0, 1, 2]]).unwrap();
        let noisy = add_gaussian_noise(&m, 0.02, 7).unwrap();
        let std = |d: &[f64]| {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let mut all = Vec::new();
        for axis in 0..3 {
            let d: Vec<f64> = noisy
                .vertices()
                .iter()
                .zip(m.vertices())
                .map(|(a, b)| a[axis] - b[axis])
                .collect();
            let s = std(&d);
            assert!((0.018..=0.022).contains(&s), "axis {axis}: {s}");
            all.extend(d);
        }
        let s = std(&all);
        assert!((0.018..=0.022).contains(&s), "pooled: {s}");
    }

    fn arb_mesh() -> impl Strategy<Value = TriangleMesh> {
        prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 3..30).prop_map(|v| {
            let n = v.len() as u32;
            let faces = (0..n - 2).map(|i| [i, i + 1, i + 2]).collect();
            TriangleMesh::new(v, faces).unwrap()
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(m in arb_mesh()) {
            let once = normalize_to_unit_cube(&m).unwrap();
            let twice = normalize_to_unit_cube(&once).unwrap();
            for (a, b) in once.vertices().iter().zip(twice.vertices()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-12);
                }
            }
            let bb = once.bounding_box().unwrap();
            let e = bb.extent();
            prop_assert!((e[0].max(e[1]).max(e[2]) - 1.0).abs() <= 1e-12);
            for k in 0..3 {
                prop_assert!(bb.center()[k].abs() <= 1e-12);
            }
            prop_assert!(once.is_normalized());
        }

        #[test]
        fn normalize_ignores_translation(m in arb_mesh(), t in prop::array::uniform3(-20.0f64..20.0)) {
            let moved = m.map_vertices(|v| [v[0] + t[0], v[1] + t[1], v[2] + t[2]]);
            let a = normalize_to_unit_cube(&m).unwrap();
            let b = normalize_to_unit_cube(&moved).unwrap();
            for (p, q) in a.vertices().iter().zip(b.vertices()) {
                for k in 0..3 {
                    prop_assert!((p[k] - q[k]).abs() <= 1e-12);
                }
            }
        }
    }
}
