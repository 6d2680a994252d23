//! Bounding volume hierarchy over triangles, used by the ray caster.

use crate::geom::{cross, dot, sub, Vec3};

pub const MAX_LEAF_SIZE: usize = 4;

/// Boxes are grown by this much so that the slab test never rejects a ray
/// the triangle test would accept.
const BOX_SLACK: f64 = 1e-9;

/// A triangle prepared for Möller–Trumbore intersection.
#[derive(Clone, Copy, Debug)]
pub struct PreparedTriangle {
    pub origin: Vec3,
    pub edge1: Vec3,
    pub edge2: Vec3,
    /// Index of the face in the source mesh.
    pub face: u32,
}

impl PreparedTriangle {
    pub fn new(tri: [Vec3; 3], face: u32) -> Self {
        PreparedTriangle {
            origin: tri[0],
            edge1: sub(tri[1], tri[0]),
            edge2: sub(tri[2], tri[0]),
            face,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        cross(self.edge1, self.edge2) == [0.0; 3]
    }

    /// Distance along `dir` from `orig` to the hit, if any (`t > 0`).
    #[inline]
    pub fn intersect(&self, orig: Vec3, dir: Vec3) -> Option<f64> {
        let pvec = cross(dir, self.edge2);
        let det = dot(self.edge1, pvec);
        if det == 0.0 {
            return None;
        }
        let inv_det = 1.0 / det;
        let tvec = sub(orig, self.origin);
        let u = dot(tvec, pvec) * inv_det;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let qvec = cross(tvec, self.edge1);
        let v = dot(dir, qvec) * inv_det;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = dot(self.edge2, qvec) * inv_det;
        (t > 0.0).then_some(t)
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let b = [
            self.origin,
            [
                self.origin[0] + self.edge1[0],
                self.origin[1] + self.edge1[1],
                self.origin[2] + self.edge1[2],
            ],
            [
                self.origin[0] + self.edge2[0],
                self.origin[1] + self.edge2[1],
                self.origin[2] + self.edge2[2],
            ],
        ];
        let mut lo = b[0];
        let mut hi = b[0];
        for p in &b[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    min: Vec3,
    max: Vec3,
    /// Leaf: first triangle. Interior: index of the left child (right = left + 1).
    start: u32,
    /// Triangle count for leaves, 0 for interior nodes.
    count: u32,
}

/// Binary tree of axis-aligned boxes over triangles; each leaf holds at most
/// [`MAX_LEAF_SIZE`] triangles, and every triangle sits in exactly one leaf.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    triangles: Vec<PreparedTriangle>,
}

/// Per-ray data reused across node tests.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    inv: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray {
            origin,
            dir,
            inv: [1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]],
        }
    }

    /// Entry distance into the box, or `None` if the ray misses it or the
    /// entry lies beyond `limit`.
    #[inline]
    fn slab(&self, min: &Vec3, max: &Vec3, limit: f64) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if self.dir[a] == 0.0 {
                if self.origin[a] < min[a] || self.origin[a] > max[a] {
                    return None;
                }
                continue;
            }
            let mut near = (min[a] - self.origin[a]) * self.inv[a];
            let mut far = (max[a] - self.origin[a]) * self.inv[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
        (t0 <= t1 && t1 >= 0.0 && t0 <= limit).then_some(t0)
    }
}

impl Bvh {
    /// Builds the tree with median splits on the widest centroid axis.
    /// Degenerate (zero-area) triangles are dropped.
    pub fn build(triangles: Vec<PreparedTriangle>) -> Self {
        let mut triangles: Vec<PreparedTriangle> =
            triangles.into_iter().filter(|t| !t.is_degenerate()).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / MAX_LEAF_SIZE + 1);
        if !triangles.is_empty() {
            nodes.push(Node {
                min: [0.0; 3],
                max: [0.0; 3],
                start: 0,
                count: 0,
            });
            let len = triangles.len();
            build_node(&mut nodes, &mut triangles, 0, 0, len);
        }
        Bvh { nodes, triangles }
    }

    pub fn triangles(&self) -> &[PreparedTriangle] {
        &self.triangles
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit distance along the ray.
    pub fn nearest_hit(&self, ray: &Ray) -> Option<f64> {
        let root = self.nodes.first()?;
        root_hit(ray, root)?;
        let mut best = f64::INFINITY;
        let mut stack: [u32; 64] = [0; 64];
        let mut top = 1usize;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if node.count > 0 {
                let first = node.start as usize;
                for tri in &self.triangles[first..first + node.count as usize] {
                    if let Some(t) = tri.intersect(ray.origin, ray.dir) {
                        if t < best {
                            best = t;
                        }
                    }
                }
                continue;
            }
            let l = node.start as usize;
            let hl = ray.slab(&self.nodes[l].min, &self.nodes[l].max, best);
            let hr = ray.slab(&self.nodes[l + 1].min, &self.nodes[l + 1].max, best);
            match (hl, hr) {
                (Some(a), Some(b)) => {
                    // Push the farther child first so the nearer one is visited next.
                    let (near, far) = if a <= b { (l, l + 1) } else { (l + 1, l) };
                    stack[top] = far as u32;
                    stack[top + 1] = near as u32;
                    top += 2;
                }
                (Some(_), None) => {
                    stack[top] = l as u32;
                    top += 1;
                }
                (None, Some(_)) => {
                    stack[top] = (l + 1) as u32;
                    top += 1;
                }
                (None, None) => {}
            }
        }
        best.is_finite().then_some(best)
    }

    /// Checks the structural invariants; used by tests.
    pub fn validate(&self) -> bool {
        if self.nodes.is_empty() {
            return self.triangles.is_empty();
        }
        let mut seen = vec![0u32; self.triangles.len()];
        let ok = self.validate_node(0, &mut seen);
        ok && seen.iter().all(|&c| c == 1)
    }

    fn validate_node(&self, index: usize, seen: &mut [u32]) -> bool {
        let node = self.nodes[index];
        let contains = |lo: &Vec3, hi: &Vec3| {
            (0..3).all(|a| lo[a] >= node.min[a] && hi[a] <= node.max[a])
        };
        if node.count > 0 {
            if node.count as usize > MAX_LEAF_SIZE {
                return false;
            }
            let first = node.start as usize;
            (first..first + node.count as usize).all(|i| {
                seen[i] += 1;
                let (lo, hi) = self.triangles[i].bounds();
                contains(&lo, &hi)
            })
        } else {
            let l = node.start as usize;
            [l, l + 1].iter().all(|&c| {
                let child = self.nodes[c];
                contains(&child.min, &child.max) && self.validate_node(c, seen)
            })
        }
    }
}

fn root_hit(ray: &Ray, root: &Node) -> Option<f64> {
    ray.slab(&root.min, &root.max, f64::INFINITY)
}

fn build_node(
    nodes: &mut Vec<Node>,
    tris: &mut [PreparedTriangle],
    index: usize,
    offset: usize,
    len: usize,
) {
    let slice = &mut tris[offset..offset + len];
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut cmin = [f64::INFINITY; 3];
    let mut cmax = [f64::NEG_INFINITY; 3];
    for t in slice.iter() {
        let (lo, hi) = t.bounds();
        for a in 0..3 {
            min[a] = min[a].min(lo[a]);
            max[a] = max[a].max(hi[a]);
            let c = 0.5 * (lo[a] + hi[a]);
            cmin[a] = cmin[a].min(c);
            cmax[a] = cmax[a].max(c);
        }
    }
    for a in 0..3 {
        min[a] -= BOX_SLACK;
        max[a] += BOX_SLACK;
    }

    if len <= MAX_LEAF_SIZE {
        nodes[index] = Node {
            min,
            max,
            start: offset as u32,
            count: len as u32,
        };
        return;
    }

    let axis = (0..3)
        .max_by(|&a, &b| (cmax[a] - cmin[a]).total_cmp(&(cmax[b] - cmin[b])))
        .unwrap_or(0);
    let key = |t: &PreparedTriangle| {
        let (lo, hi) = t.bounds();
        lo[axis] + hi[axis]
    };
    let mid = len / 2;
    slice.select_nth_unstable_by(mid, |a, b| key(a).total_cmp(&key(b)).then(a.face.cmp(&b.face)));

    let left = nodes.len();
    nodes.push(Node {
        min: [0.0; 3],
        max: [0.0; 3],
        start: 0,
        count: 0,
    });
    nodes.push(Node {
        min: [0.0; 3],
        max: [0.0; 3],
        start: 0,
        count: 0,
    });
    nodes[index] = Node {
        min,
        max,
        start: left as u32,
        count: 0,
    };
    build_node(nodes, tris, left, offset, mid);
    build_node(nodes, tris, left + 1, offset + mid, len - mid);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_partition_triangles() {
        let tris: Vec<PreparedTriangle> = (0..37)
            .map(|i| {
                let x = i as f64 * 0.01;
                PreparedTriangle::new([[x, 0.0, 0.0], [x + 0.1, 0.0, 0.0], [x, 0.1, 0.05]], i)
            })
            .collect();
        let bvh = Bvh::build(tris);
        assert_eq!(bvh.triangles().len(), 37);
        assert!(bvh.validate());
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let tris = vec![
            PreparedTriangle::new([[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], 0),
            PreparedTriangle::new([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 1),
        ];
        let bvh = Bvh::build(tris);
        assert_eq!(bvh.triangles().len(), 1);
        let ray = Ray::new([0.2, 0.2, 1.0], [0.0, 0.0, -1.0]);
        assert_eq!(bvh.nearest_hit(&ray), Some(1.0));
    }

    #[test]
    fn empty_tree_never_hits() {
        let bvh = Bvh::build(Vec::new());
        assert!(bvh.validate());
        assert_eq!(bvh.nearest_hit(&Ray::new([0.0; 3], [1.0, 0.0, 0.0])), None);
    }
}
