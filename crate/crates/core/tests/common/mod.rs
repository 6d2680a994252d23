//! Helpers and independent reference implementations shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use mvpose::entropy::EntropyMap;
use mvpose::mesh::{normalize_to_unit_cube, TriangleMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Triangle soup of `triangles` random triangles of mixed sizes, normalized.
pub fn random_mesh(seed: u64, triangles: usize) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::with_capacity(3 * triangles);
    let mut faces = Vec::with_capacity(triangles);
    for t in 0..triangles {
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let size = if rng.random_bool(0.2) { 1.0 } else { 0.15 };
        for _ in 0..3 {
            vertices.push(std::array::from_fn(|a| c[a] + size * rng.random_range(-1.0..1.0)));
        }
        let b = 3 * t as u32;
        faces.push([b, b + 1, b + 2]);
    }
    normalize_to_unit_cube(&TriangleMesh::new(vertices, faces).unwrap()).unwrap()
}

pub fn random_map(rng: &mut ChaCha8Rng) -> EntropyMap {
    // Few distinct levels so plateaus and wrap-around ties are common.
    let levels = rng.random_range(1..6);
    let continuous = rng.random_bool(0.3);
    let v: Vec<f64> = (0..60)
        .map(|_| {
            if continuous {
                rng.random_range(0.0..8.0)
            } else {
                rng.random_range(0..levels) as f64
            }
        })
        .collect();
    EntropyMap::from_vector(&v).unwrap()
}

/// Brute-force peak scan: plateaus by transitive closure of the equal-value
/// adjacency relation, then a direct check of every plateau border.
pub fn brute_force_peaks(map: &EntropyMap) -> Vec<(usize, usize)> {
    let at = |i: usize| map.get(i / 12, i % 12);
    let adjacent = |a: usize, b: usize| {
        let (ka, ja) = ((a / 12) as i64, (a % 12) as i64);
        let (kb, jb) = ((b / 12) as i64, (b % 12) as i64);
        let dj = (ja - jb).rem_euclid(12);
        a != b && (ka - kb).abs() <= 1 && (dj <= 1 || dj == 11)
    };
    let mut same = [[false; 60]; 60];
    for a in 0..60 {
        for b in 0..60 {
            same[a][b] = a == b || (adjacent(a, b) && at(a) == at(b));
        }
    }
    for m in 0..60 {
        for a in 0..60 {
            for b in 0..60 {
                if same[a][m] && same[m][b] {
                    same[a][b] = true;
                }
            }
        }
    }
    let mut peaks = Vec::new();
    for a in 0..60 {
        let members: Vec<usize> = (0..60).filter(|&b| same[a][b]).collect();
        if members[0] != a {
            continue;
        }
        if members.len() == 60 {
            return vec![(0, 0)];
        }
        let dominated = members
            .iter()
            .any(|&m| (0..60).any(|n| adjacent(m, n) && at(n) > at(m)));
        if !dominated {
            peaks.push(a);
        }
    }
    peaks.sort_by(|&a, &b| at(b).partial_cmp(&at(a)).unwrap().then(a.cmp(&b)));
    peaks.into_iter().map(|i| (i / 12, i % 12)).collect()
}

/// Occupied cells of the unit-cube surface in a grid with `interior` cells
/// per side: a cell is occupied when the squared distance between its closed
/// box and one of the six closed faces is zero.
pub fn cube_shell_cells(interior: usize) -> Vec<[usize; 3]> {
    let n = interior as f64;
    let gap = |lo: f64, hi: f64, flo: f64, fhi: f64| (flo - hi).max(lo - fhi).max(0.0);
    let mut out = Vec::new();
    for x in 0..interior {
        for y in 0..interior {
            for z in 0..interior {
                let cell = [x as f64, y as f64, z as f64];
                let touches = (0..3).any(|axis| {
                    [0.0, n].iter().any(|&plane| {
                        let d2: f64 = (0..3)
                            .map(|a| {
                                let (flo, fhi) = if a == axis { (plane, plane) } else { (0.0, n) };
                                gap(cell[a], cell[a] + 1.0, flo, fhi).powi(2)
                            })
                            .sum();
                        d2 == 0.0
                    })
                });
                if touches {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Entropy recomputed from pixel counts with natural logs.
pub fn entropy_by_counting(pixels: &[u8]) -> f64 {
    let mut counts = std::collections::HashMap::new();
    for &p in pixels {
        *counts.entry(p).or_insert(0usize) += 1;
    }
    let n = pixels.len() as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    (h / std::f64::consts::LN_2).max(0.0)
}
