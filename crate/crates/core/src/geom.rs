//! Small fixed-size vector helpers shared by the mesh, voxel and render code.

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// `(sin, cos)` of `30 * steps` degrees, taken from a table so that the
/// values are exactly symmetric under reflection and negation.
pub fn sin_cos_30(steps: i64) -> (f64, f64) {
    const H: f64 = 0.866_025_403_784_438_6; // sqrt(3) / 2
    const TABLE: [(f64, f64); 12] = [
        (0.0, 1.0),
        (0.5, H),
        (H, 0.5),
        (1.0, 0.0),
        (H, -0.5),
        (0.5, -H),
        (0.0, -1.0),
        (-0.5, -H),
        (-H, -0.5),
        (-1.0, 0.0),
        (-H, 0.5),
        (-0.5, H),
    ];
    TABLE[steps.rem_euclid(12) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_libm() {
        for m in -12..24 {
            let (s, c) = sin_cos_30(m);
            let a = (30.0 * m as f64).to_radians();
            assert!((s - a.sin()).abs() < 1e-15);
            assert!((c - a.cos()).abs() < 1e-15);
        }
    }
}
