//! Synthetic primitive meshes for desk-scale experiments.
//!
//! Instances are randomized in proportions and lean forward (towards +x) by a
//! height-dependent shear. The lean gives every instance a single canonical
//! front, so yaw is observable even for bodies of revolution.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{normalize_to_unit_cube, write_off, TriangleMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Box,
    Cylinder,
    Cone,
    Pyramid,
    Sphere,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::Box,
        Primitive::Cylinder,
        Primitive::Cone,
        Primitive::Pyramid,
        Primitive::Sphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Box => "box",
            Primitive::Cylinder => "cylinder",
            Primitive::Cone => "cone",
            Primitive::Pyramid => "pyramid",
            Primitive::Sphere => "sphere",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The 12-triangle surface of `[-0.5, 0.5]^3`.
pub fn unit_cube() -> TriangleMesh {
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
        [0, 2, 3], [0, 3, 1],
        [4, 5, 7], [4, 7, 6],
        [0, 1, 5], [0, 5, 4],
        [2, 6, 7], [2, 7, 3],
        [0, 4, 6], [0, 6, 2],
        [1, 3, 7], [1, 7, 5],
    ];
    TriangleMesh::new(v, faces).expect("static cube is valid")
}

/// Axis-aligned box centred at the origin with the given extents.
pub fn cuboid(extents: Vec3) -> TriangleMesh {
    unit_cube().map_vertices(|v| [v[0] * extents[0], v[1] * extents[1], v[2] * extents[2]])
}

/// Surface of revolution about +z. `profile` lists `(radius, z)` from bottom
/// to top; zero-radius entries become single pole vertices. Segment `i` sits
/// at angle `phase + 2*pi*i/segments`.
pub fn lathe(profile: &[(f64, f64)], segments: usize, phase: f64) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<u32>> = Vec::with_capacity(profile.len());
    for &(r, z) in profile {
        if r == 0.0 {
            let id = vertices.len() as u32;
            vertices.push([0.0, 0.0, z]);
            rings.push(vec![id; segments]);
        } else {
            let ring = (0..segments)
                .map(|i| {
                    let a = phase + std::f64::consts::TAU * i as f64 / segments as f64;
                    vertices.push([r * a.cos(), r * a.sin(), z]);
                    (vertices.len() - 1) as u32
                })
                .collect();
            rings.push(ring);
        }
    }
    let mut faces = Vec::new();
    for w in rings.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for i in 0..segments {
            let n = (i + 1) % segments;
            let quad = [lo[i], lo[n], hi[n], hi[i]];
            // Outward winding for a profile walked bottom to top.
            for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                    faces.push(tri);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("lathe indices are in range")
}

fn closed_profile(bottom_r: f64, top_r: f64, half_h: f64, rings: usize) -> Vec<(f64, f64)> {
    let mut p = vec![(0.0, -half_h)];
    for i in 1..=rings {
        p.push((bottom_r * i as f64 / rings as f64, -half_h));
    }
    for i in 1..rings {
        let s = i as f64 / rings as f64;
        p.push((bottom_r + (top_r - bottom_r) * s, -half_h + 2.0 * half_h * s));
    }
    if top_r > 0.0 {
        for i in (0..=rings).rev() {
            p.push((top_r * i as f64 / rings as f64, half_h));
        }
    } else {
        p.push((0.0, half_h));
    }
    p
}

/// Randomized instance of a primitive, normalized to the unit cube.
pub fn primitive_instance(kind: Primitive, rng: &mut impl Rng) -> TriangleMesh {
    let sx = rng.random_range(0.6..1.0);
    let sy = rng.random_range(0.6..1.0);
    let height = rng.random_range(0.7..1.2);
    let lean = rng.random_range(0.3..0.5);
    let h = height / 2.0;
    let base = match kind {
        Primitive::Box => lathe(&closed_profile(0.5, 0.5, h, 4), 4, std::f64::consts::FRAC_PI_4)
            .map_vertices(|v| [v[0] * std::f64::consts::SQRT_2, v[1] * std::f64::consts::SQRT_2, v[2]]),
        Primitive::Cylinder => lathe(&closed_profile(0.5, 0.5, h, 4), 32, 0.0),
        Primitive::Cone => lathe(&closed_profile(0.5, 0.0, h, 6), 32, 0.0),
        Primitive::Pyramid => lathe(&closed_profile(0.5, 0.0, h, 6), 4, std::f64::consts::FRAC_PI_4)
            .map_vertices(|v| [v[0] * std::f64::consts::SQRT_2, v[1] * std::f64::consts::SQRT_2, v[2]]),
        Primitive::Sphere => {
            let profile: Vec<(f64, f64)> = (0..=16)
                .map(|i| {
                    let a = std::f64::consts::PI * i as f64 / 16.0;
                    let r = if i == 0 || i == 16 { 0.0 } else { 0.5 * a.sin() };
                    (r, -h * a.cos())
                })
                .collect();
            lathe(&profile, 32, 0.0)
        }
    };
    let shaped = base.map_vertices(|[x, y, z]| [x * sx + lean * z, y * sy, z]);
    normalize_to_unit_cube(&shaped).expect("primitives have positive extent")
}

/// One generated model file.
#[derive(Clone, Debug)]
pub struct SyntheticModel {
    pub object_id: String,
    pub category: Primitive,
    pub split: &'static str,
    pub mesh: TriangleMesh,
}

/// `per_category` instances of every primitive; the last `test_per_category`
/// of each go to the test split. Ids look like `cone_0007`.
pub fn primitive_set(per_category: usize, test_per_category: usize, seed: u64) -> Vec<SyntheticModel> {
    let mut out = Vec::new();
    for (c, kind) in Primitive::ALL.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(c as u64));
        for i in 0..per_category {
            let split = if i + test_per_category >= per_category { "test" } else { "train" };
            out.push(SyntheticModel {
                object_id: format!("{}_{:04}", kind.name(), i + 1),
                category: *kind,
                split,
                mesh: primitive_instance(*kind, &mut rng),
            });
        }
    }
    out
}

/// Writes models in the `category/split/object_id.off` layout.
pub fn write_model_tree(models: &[SyntheticModel], root: &Path) -> Result<()> {
    for m in models {
        let dir = root.join(m.category.name()).join(m.split);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_off(&m.mesh, &dir.join(format!("{}.off", m.object_id)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_normalized_and_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in Primitive::ALL {
            let m = primitive_instance(kind, &mut rng);
            assert!(m.is_normalized(), "{kind}");
            let e = m.bounding_box().unwrap().extent();
            assert!((e[0].max(e[1]).max(e[2]) - 1.0).abs() < 1e-12);
            // Closed 2-manifold: every undirected edge is shared by two faces.
            let mut edges = std::collections::HashMap::new();
            for f in m.faces() {
                for k in 0..3 {
                    let (a, b) = (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]));
                    *edges.entry((a, b)).or_insert(0) += 1;
                }
            }
            assert!(edges.values().all(|&c| c == 2), "{kind} not closed");
        }
    }

    #[test]
    fn set_layout() {
        let set = primitive_set(4, 1, 3);
        assert_eq!(set.len(), 20);
        assert_eq!(set.iter().filter(|m| m.split == "test").count(), 5);
        assert_eq!(set[0].object_id, "box_0001");
        let again = primitive_set(4, 1, 3);
        assert!(set.iter().zip(&again).all(|(a, b)| a.mesh == b.mesh));
    }
}
