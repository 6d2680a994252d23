//! Orthographic depth rendering by ray casting.
//!
//! Each pixel centre shoots one ray along the camera's viewing direction. The
//! image plane is a square of side [`RenderConfig::view_extent`] centred on
//! the view axis and passing through the camera position. Hit distances in
//! `[R - 1, R + 1]` map linearly onto codes `255..=1`; misses are 0.

pub mod bvh;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{sin_cos_30, Vec3};
use crate::mesh::TriangleMesh;
use crate::viewrig::{Rig, Viewpoint};

pub use bvh::{Bvh, PreparedTriangle, Ray};

pub const IMAGE_SIZE: usize = 224;
pub const VIEW_EXTENT: f64 = 1.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    /// Width and height in pixels.
    pub size: usize,
    /// Side of the square imaged by the orthographic camera, unit-cube units.
    pub view_extent: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            size: IMAGE_SIZE,
            view_extent: VIEW_EXTENT,
        }
    }
}

/// 8-bit depth image, row-major from the top-left pixel. 0 is background;
/// larger codes are closer to the camera.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(DepthImage {
            width,
            height,
            pixels,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub fn flipped_vertically(&self) -> DepthImage {
        let pixels = self
            .pixels
            .chunks(self.width)
            .rev()
            .flatten()
            .copied()
            .collect();
        DepthImage {
            pixels,
            ..*self
        }
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::format("PGM", 0, msg);
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a binary PGM (P5)"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
        let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
        if data.len() != w * h {
            return Err(bad("raster size does not match the header"));
        }
        DepthImage::new(w, h, data.to_vec())
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_pgm()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes)
    }
}

/// Orthographic camera frame for a rig viewpoint.
#[derive(Clone, Copy, Debug)]
pub struct Camera {
    pub position: Vec3,
    /// Unit viewing direction, towards the origin.
    pub forward: Vec3,
    pub right: Vec3,
    /// World +z projected onto the image plane.
    pub up: Vec3,
    pub radius: f64,
}

impl Camera {
    pub fn for_view(view: &Viewpoint) -> Self {
        let (sp, cp) = sin_cos_30(view.ring as i64 + 1);
        let (st, ct) = sin_cos_30(view.azimuth as i64);
        Camera {
            position: view.position,
            forward: [-sp * ct, -sp * st, -cp],
            right: [-st, ct, 0.0],
            up: [-cp * ct, -cp * st, sp],
            radius: view.radius,
        }
    }

    /// Ray through the centre of pixel `(row, col)`.
    #[inline]
    pub fn ray(&self, row: usize, col: usize, config: &RenderConfig) -> Ray {
        let n = config.size as f64;
        let u = (2.0 * col as f64 + 1.0 - n) / (2.0 * n) * config.view_extent;
        let v = (n - 2.0 * row as f64 - 1.0) / (2.0 * n) * config.view_extent;
        let p = self.position;
        let origin = [
            p[0] + u * self.right[0] + v * self.up[0],
            p[1] + u * self.right[1] + v * self.up[1],
            p[2] + u * self.right[2] + v * self.up[2],
        ];
        Ray::new(origin, self.forward)
    }
}

/// Depth code for a hit at distance `t` from a camera at radius `radius`.
#[inline]
pub fn depth_code(t: f64, radius: f64) -> u8 {
    let near = radius - 1.0;
    let code = 255.0 - (t - near) * 127.0;
    code.round().clamp(1.0, 255.0) as u8
}

/// A mesh prepared for repeated rendering.
#[derive(Clone, Debug)]
pub struct Renderer {
    bvh: Bvh,
    config: RenderConfig,
}

impl Renderer {
    pub fn new(mesh: &TriangleMesh, config: RenderConfig) -> Result<Self> {
        if config.size == 0 || !(config.view_extent > 0.0) {
            return Err(Error::invalid("render size and view extent must be positive"));
        }
        mesh.ensure_normalized()?;
        Ok(Renderer {
            bvh: Bvh::build(prepare(mesh)),
            config,
        })
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn render(&self, view: &Viewpoint) -> DepthImage {
        let camera = Camera::for_view(view);
        shade(&self.config, |row, col| {
            self.bvh
                .nearest_hit(&camera.ray(row, col, &self.config))
                .map(|t| depth_code(t, camera.radius))
        })
    }
}

fn prepare(mesh: &TriangleMesh) -> Vec<PreparedTriangle> {
    (0..mesh.faces().len())
        .map(|f| PreparedTriangle::new(mesh.triangle(f), f as u32))
        .collect()
}

fn shade(config: &RenderConfig, pixel: impl Fn(usize, usize) -> Option<u8> + Sync) -> DepthImage {
    let n = config.size;
    let mut pixels = vec![0u8; n * n];
    pixels
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(row, out)| {
            for (col, px) in out.iter_mut().enumerate() {
                *px = pixel(row, col).unwrap_or(0);
            }
        });
    DepthImage {
        width: n,
        height: n,
        pixels,
    }
}

pub fn render_depth(mesh: &TriangleMesh, view: &Viewpoint, config: RenderConfig) -> Result<DepthImage> {
    Ok(Renderer::new(mesh, config)?.render(view))
}

/// Reference renderer that tests every triangle for every pixel.
pub fn render_depth_brute_force(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    config: RenderConfig,
) -> Result<DepthImage> {
    mesh.ensure_normalized()?;
    let tris = prepare(mesh);
    let camera = Camera::for_view(view);
    Ok(shade(&config, |row, col| {
        let ray = camera.ray(row, col, &config);
        tris.iter()
            .filter_map(|t| t.intersect(ray.origin, ray.dir))
            .min_by(f64::total_cmp)
            .map(|t| depth_code(t, camera.radius))
    }))
}

/// Renders every rig view; output is ordered by viewpoint index.
pub fn render_all_views(mesh: &TriangleMesh, rig: &Rig, config: RenderConfig) -> Result<Vec<DepthImage>> {
    let renderer = Renderer::new(mesh, config)?;
    Ok(rig.views().par_iter().map(|v| renderer.render(v)).collect())
}

/// Same as [`render_all_views`] on the calling thread only.
pub fn render_all_views_serial(
    mesh: &TriangleMesh,
    rig: &Rig,
    config: RenderConfig,
) -> Result<Vec<DepthImage>> {
    let renderer = Renderer::new(mesh, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok(pool.install(|| rig.views().iter().map(|v| renderer.render(v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::viewrig::index_of;

    fn cube() -> TriangleMesh {
        crate::synth::unit_cube()
    }

    #[test]
    fn empty_mesh_renders_blank() {
        let m = TriangleMesh::new(vec![], vec![]).unwrap();
        let img = render_depth(&m, &Rig::default().views()[0], RenderConfig::default()).unwrap();
        assert_eq!(img.pixels().len(), 224 * 224);
        assert_eq!(img.foreground_count(), 0);
    }

    #[test]
    fn cube_face_on_silhouette() {
        let rig = Rig::default();
        let view = rig.viewpoint(index_of(2, 0).unwrap()).unwrap();
        let img = render_depth(&cube(), &view, RenderConfig::default()).unwrap();
        let frac = img.foreground_count() as f64 / (224.0 * 224.0);
        assert!((frac - (1.0 / 1.9f64).powi(2)).abs() <= 0.01, "{frac}");
        // Face at distance R - 0.5 = 1.5 -> 255 - 0.5 * 127 = 191.5 -> 192.
        assert!(img.pixels().iter().all(|&p| p == 0 || p == 192));
    }

    #[test]
    fn depth_codes_are_antitone_and_clamped() {
        let r = 2.0;
        assert_eq!(depth_code(1.0, r), 255);
        assert_eq!(depth_code(3.0, r), 1);
        assert_eq!(depth_code(0.5, r), 255);
        assert_eq!(depth_code(9.0, r), 1);
        let mut prev = 255;
        for i in 0..=2000 {
            let c = depth_code(0.5 + i as f64 * 0.0015, r);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn unnormalized_mesh_rejected() {
        let m = cube().map_vertices(|v| [v[0] * 3.0, v[1], v[2]]);
        assert!(render_depth(&m, &Rig::default().views()[0], RenderConfig::default()).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = render_depth(&cube(), &Rig::default().views()[7], RenderConfig::default()).unwrap();
        let bytes = img.to_pgm();
        assert!(bytes.starts_with(b"P5\n224 224\n255\n"));
        assert_eq!(DepthImage::from_pgm(&bytes).unwrap(), img);
        assert!(DepthImage::from_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(DepthImage::from_pgm(b"P5\n2 2\n255\n\x00").is_err());
    }
}
