//! Z-buffered mesh rasterization and splat/mesh composition.

use splatnav_core::mesh::{TriangleMesh, P3};
use splatnav_core::{Camera, Image, RenderOutput, Vec3};

use crate::error::{Result, SimError};

const Z_NEAR: f64 = 0.01;
/// Splat pixels with less accumulated alpha are treated as empty.
pub const SPLAT_ALPHA_MIN: f32 = 0.5;

/// Color plus camera-frame depth; empty pixels hold `f32::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub color: Image<f32>,
    pub depth: Image<f32>,
}

impl Layer {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: Image::new(width, height, 3),
            depth: Image::filled(width, height, 1, f32::INFINITY),
        }
    }

    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Splat render as a layer: depth is alpha-normalized, and infinite
    /// where alpha is below [`SPLAT_ALPHA_MIN`].
    pub fn from_splats(r: &RenderOutput<f32>) -> Self {
        let mut depth = r.depth.clone();
        for (d, &a) in depth.data.iter_mut().zip(&r.alpha.data) {
            *d = if a >= SPLAT_ALPHA_MIN { *d / a } else { f32::INFINITY };
        }
        Self {
            color: r.color.clone(),
            depth,
        }
    }
}

fn shade(color: [f64; 3], normal: P3) -> [f32; 3] {
    let l = [0.32, 0.48, 0.82];
    let k = 0.4 + 0.6 * (normal[0] * l[0] + normal[1] * l[1] + normal[2] * l[2]).abs();
    color.map(|c| (c * k).clamp(0.0, 1.0) as f32)
}

fn clip_near(poly: &[Vec3<f64>]) -> Vec<Vec3<f64>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ia, ib) = (a.z >= Z_NEAR, b.z >= Z_NEAR);
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (Z_NEAR - a.z) / (b.z - a.z);
            out.push(a + (b - a).scale(t));
        }
    }
    out
}

fn draw_triangle(layer: &mut Layer, cam: &Camera<f64>, v: [Vec3<f64>; 3], rgb: [f32; 3]) {
    let p: Vec<(f64, f64)> = v.iter().map(|&q| cam.project(q)).collect();
    let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[1].1 - p[0].1) * (p[2].0 - p[0].0);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let (w, h) = (cam.width as f64, cam.height as f64);
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).max(0.0);
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).min(w);
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).max(0.0);
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).min(h);
    if min_x >= max_x || min_y >= max_y {
        return;
    }
    let c0 = (min_x - 0.5).ceil().max(0.0) as usize;
    let c1 = ((max_x - 0.5).floor() as i64).min(cam.width as i64 - 1);
    let r0 = (min_y - 0.5).ceil().max(0.0) as usize;
    let r1 = ((max_y - 0.5).floor() as i64).min(cam.height as i64 - 1);
    if c1 < 0 || r1 < 0 {
        return;
    }
    let edge = |a: (f64, f64), b: (f64, f64), x: f64, y: f64| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
    for row in r0..=r1 as usize {
        let y = row as f64 + 0.5;
        for col in c0..=c1 as usize {
            let x = col as f64 + 0.5;
            let b0 = edge(p[1], p[2], x, y) / area;
            let b1 = edge(p[2], p[0], x, y) / area;
            let b2 = edge(p[0], p[1], x, y) / area;
            if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                continue;
            }
            // Perspective-correct depth.
            let z = 1.0 / (b0 / v[0].z + b1 / v[1].z + b2 / v[2].z);
            let zf = z as f32;
            if zf < layer.depth.get(row, col, 0) {
                layer.depth.set(row, col, 0, zf);
                layer.color.pixel_mut(row, col).copy_from_slice(&rgb);
            }
        }
    }
}

/// Renders flat-shaded meshes with a z-buffer.
pub fn render_meshes(items: &[(&TriangleMesh, [f64; 3])], cam: &Camera<f64>) -> Layer {
    let mut layer = Layer::empty(cam.width, cam.height);
    for (mesh, color) in items {
        for f in 0..mesh.faces.len() {
            let tri = mesh.triangle(f);
            let rgb = shade(*color, mesh.face_normal(f));
            let vc: Vec<Vec3<f64>> = tri
                .iter()
                .map(|q| cam.world_to_camera(Vec3::new(q[0], q[1], q[2])))
                .collect();
            let poly = clip_near(&vc);
            for k in 1..poly.len().saturating_sub(1) {
                draw_triangle(&mut layer, cam, [poly[0], poly[k], poly[k + 1]], rgb);
            }
        }
    }
    layer
}

/// Per pixel, keeps whichever layer is nearer; ties go to `background`.
pub fn compose(background: &Layer, foreground: &Layer) -> Result<Layer> {
    if background.color.shape() != foreground.color.shape() || background.depth.shape() != foreground.depth.shape() {
        return Err(SimError::Core(splatnav_core::Error::DimensionMismatch {
            expected: background.color.shape(),
            got: foreground.color.shape(),
        }));
    }
    let mut out = background.clone();
    for p in 0..out.depth.data.len() {
        let fd = foreground.depth.data[p];
        if fd < out.depth.data[p] {
            out.depth.data[p] = fd;
            out.color.data[p * 3..p * 3 + 3].copy_from_slice(&foreground.color.data[p * 3..p * 3 + 3]);
        }
    }
    Ok(out)
}
