//! Ground detection from rendered normals and ground-face removal.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::linalg::Vec3;
use crate::mesh::trimesh::{dot, normalize, TriangleMesh, P3};
use crate::scalar::Real;

pub const DEFAULT_GROUND_ANGLE_DEG: f64 = 15.0;
/// Height quantile that anchors the ground in the vector fallback.
pub const DEFAULT_HEIGHT_QUANTILE: f64 = 0.1;
/// Fraction of image rows, from the bottom, used as the default seed.
pub const DEFAULT_SEED_FRACTION: f64 = 0.2;
/// Largest relative depth step between neighbouring pixels of one ground region.
pub const DEFAULT_MAX_REL_JUMP: f64 = 0.05;

/// Angles this close to the threshold count as on the boundary (excluded).
const ANGLE_EPS_DEG: f64 = 1e-9;

/// Per-frame ground pixels. `mask` is `true` on ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundMask {
    pub mask: Mask,
    /// Mean seed normal, camera frame, unit length.
    pub reference: [f64; 3],
    pub delta_deg: f64,
}

/// Bottom rows of the image as a seed region.
pub fn default_seed_region(width: usize, height: usize, fraction: f64) -> Mask {
    let mut m = Mask::new(width, height, false);
    let rows = ((height as f64 * fraction).ceil() as usize).clamp(1, height);
    for r in height - rows..height {
        for c in 0..width {
            m.set(r, c, true);
        }
    }
    m
}

fn angle_deg(a: P3, b: P3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Pixels whose normal lies strictly within `delta_deg` of the mean normal
/// over `seed`.
pub fn ground_mask<T: Real>(normals: &Image<T>, seed: &Mask, delta_deg: f64) -> Result<GroundMask> {
    if !(delta_deg > 0.0 && delta_deg < 90.0) {
        return Err(Error::InvalidParameter(format!("ground angle must be in (0, 90), got {delta_deg}")));
    }
    seed.ensure_matches(normals)?;
    if normals.channels != 3 {
        return Err(Error::InvalidParameter("normal map needs 3 channels".into()));
    }
    let read = |p: usize| -> P3 {
        normalize([
            normals.data[p * 3].as_f64(),
            normals.data[p * 3 + 1].as_f64(),
            normals.data[p * 3 + 2].as_f64(),
        ])
    };
    let mut sum = [0.0; 3];
    let mut used = 0;
    for p in 0..normals.num_pixels() {
        if seed.data[p] {
            let n = read(p);
            if n != [0.0; 3] {
                sum = crate::mesh::trimesh::add(sum, n);
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::EmptySupport("ground seed region has no rendered normals"));
    }
    let reference = normalize(sum);
    let mut mask = Mask::new(normals.width, normals.height, false);
    for p in 0..normals.num_pixels() {
        let n = read(p);
        mask.data[p] = n != [0.0; 3] && angle_deg(n, reference) < delta_deg - ANGLE_EPS_DEG;
    }
    Ok(GroundMask {
        mask,
        reference,
        delta_deg,
    })
}

/// Keeps only the ground pixels reachable from `seed` through 4-neighbours
/// whose depths differ by at most `max_rel_jump` of the nearer one. Raised
/// horizontal surfaces (table or box tops) share the ground normal but sit
/// behind a depth discontinuity, so they drop out.
pub fn connected_ground<T: Real>(m: &GroundMask, seed: &Mask, depth: &Image<T>, max_rel_jump: f64) -> Result<GroundMask> {
    seed.ensure_matches(depth)?;
    m.mask.ensure_matches(depth)?;
    let (w, h) = (depth.width, depth.height);
    let d = |p: usize| depth.data[p].as_f64();
    let mut out = Mask::new(w, h, false);
    let mut stack: Vec<usize> = (0..w * h).filter(|&p| seed.data[p] && m.mask.data[p] && d(p) > 0.0).collect();
    for &p in &stack {
        out.data[p] = true;
    }
    while let Some(p) = stack.pop() {
        let (r, c) = (p / w, p % w);
        let mut visit = |q: usize| {
            if out.data[q] || !m.mask.data[q] {
                return;
            }
            let (a, b) = (d(p), d(q));
            if b > 0.0 && (a - b).abs() <= max_rel_jump * a.min(b) {
                out.data[q] = true;
                stack.push(q);
            }
        };
        if r > 0 {
            visit(p - w);
        }
        if r + 1 < h {
            visit(p + w);
        }
        if c > 0 {
            visit(p - 1);
        }
        if c + 1 < w {
            visit(p + 1);
        }
    }
    Ok(GroundMask { mask: out, ..m.clone() })
}

/// One frame of evidence for mask-based removal.
#[derive(Debug, Clone)]
pub struct GroundView<'a, T> {
    pub camera: &'a Camera<T>,
    pub mask: &'a GroundMask,
    /// Rendered depth; when given, vertices hidden behind it by more than
    /// `occlusion_tolerance` do not vote.
    pub depth: Option<&'a Image<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorGround {
    pub up: [f64; 3],
    pub delta_deg: f64,
    pub quantile: f64,
    /// Faces up to this far above the quantile height count as ground.
    pub band: f64,
}

impl Default for VectorGround {
    fn default() -> Self {
        Self {
            up: [0.0, 0.0, 1.0],
            delta_deg: DEFAULT_GROUND_ANGLE_DEG,
            quantile: DEFAULT_HEIGHT_QUANTILE,
            band: 0.2,
        }
    }
}

/// Which faces are ground by majority vote of vertex projections into the
/// ground masks. A face is removed when more than half of its visible
/// `(vertex, view)` observations land on ground pixels.
pub fn ground_faces_from_masks<T: Real>(mesh: &TriangleMesh, views: &[GroundView<'_, T>], occlusion_tolerance: f64) -> Vec<bool> {
    let cams: Vec<Camera<f64>> = views.iter().map(|v| v.camera.cast::<f64>()).collect();
    // Per vertex: (ground votes, total votes).
    let votes: Vec<(u32, u32)> = mesh
        .vertices
        .iter()
        .map(|&p| {
            let mut g = 0;
            let mut t = 0;
            for (view, cam) in views.iter().zip(&cams) {
                let pc = cam.world_to_camera(Vec3::new(p[0], p[1], p[2]));
                if pc.z <= 0.0 {
                    continue;
                }
                let (u, v) = cam.project(pc);
                if !(u >= 0.0 && v >= 0.0) {
                    continue;
                }
                let (col, row) = (u.floor() as usize, v.floor() as usize);
                if col >= cam.width || row >= cam.height {
                    continue;
                }
                if let Some(d) = view.depth {
                    let dz = d.get(row, col, 0).as_f64();
                    if dz > 0.0 && pc.z > dz + occlusion_tolerance {
                        continue;
                    }
                }
                t += 1;
                if view.mask.mask.get(row, col) {
                    g += 1;
                }
            }
            (g, t)
        })
        .collect();
    mesh.faces
        .iter()
        .map(|f| {
            let (g, t) = f
                .iter()
                .fold((0, 0), |(g, t), &i| (g + votes[i as usize].0, t + votes[i as usize].1));
            t > 0 && 2 * g > t
        })
        .collect()
}

/// Ground faces for the vector fallback: face normal within `delta_deg` of
/// `up`, and centroid height at most `band` above the `quantile` of vertex
/// heights.
pub fn ground_faces_from_vector(mesh: &TriangleMesh, cfg: &VectorGround) -> Vec<bool> {
    if mesh.faces.is_empty() {
        return Vec::new();
    }
    let up = normalize(cfg.up);
    let mut heights: Vec<f64> = mesh.vertices.iter().map(|&v| dot(v, up)).collect();
    heights.sort_by(|a, b| a.total_cmp(b));
    let q = ((heights.len() - 1) as f64 * cfg.quantile.clamp(0.0, 1.0)).round() as usize;
    let ground_h = heights[q];
    (0..mesh.faces.len())
        .map(|f| {
            let n = mesh.face_normal(f);
            n != [0.0; 3]
                && angle_deg(n, up) < cfg.delta_deg - ANGLE_EPS_DEG
                && dot(mesh.face_centroid(f), up) <= ground_h + cfg.band
        })
        .collect()
}

/// How ground faces are identified.
#[derive(Debug, Clone)]
pub enum GroundRemoval<'a, T> {
    Masks {
        views: Vec<GroundView<'a, T>>,
        occlusion_tolerance: f64,
        /// Use the vector rule when `views` is empty.
        fallback: Option<VectorGround>,
    },
    Vector(VectorGround),
    None,
}

/// Removes ground faces; the mesh is returned unchanged when nothing applies.
pub fn remove_ground<T: Real>(mesh: &TriangleMesh, how: &GroundRemoval<'_, T>) -> TriangleMesh {
    let ground = match how {
        GroundRemoval::None => return mesh.clone(),
        GroundRemoval::Vector(v) => ground_faces_from_vector(mesh, v),
        GroundRemoval::Masks {
            views,
            occlusion_tolerance,
            fallback,
        } => {
            if views.is_empty() {
                match fallback {
                    Some(v) => ground_faces_from_vector(mesh, v),
                    None => {
                        log::warn!("no ground masks and no fallback; mesh left unchanged");
                        return mesh.clone();
                    }
                }
            } else {
                ground_faces_from_masks(mesh, views, *occlusion_tolerance)
            }
        }
    };
    let keep: Vec<bool> = ground.iter().map(|g| !g).collect();
    mesh.retain_faces(&keep)
}
