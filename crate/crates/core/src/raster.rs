//! Tile-binned, depth-sorted alpha compositing of color, depth and normal.
//!
//! Per pixel, splats whose support ellipse (3σ of the dilated screen
//! covariance) contains the pixel center are blended front to back:
//! `c = Σ Tᵢ αᵢ cᵢ`, `D = Σ Tᵢ αᵢ dᵢ`, `N = Σ Tᵢ αᵢ nᵢ`, with
//! `Tᵢ = Π_{j<i} (1 − αⱼ)` and `αᵢ = oᵢ·Gᵢ(x)`. Blending stops once the
//! transmittance drops below [`TRANSMITTANCE_EPS`].

use rayon::prelude::*;

use crate::camera::Camera;
use crate::culling::{cull_mask_projected, CullConfig};
use crate::error::Result;
use crate::image::Image;
use crate::linalg::Vec3;
use crate::projection::{project_splat, ProjectedSplat};
use crate::scalar::Real;
use crate::splat::SplatSet;

pub const TILE_SIZE: usize = 16;
pub const TRANSMITTANCE_EPS: f64 = 1e-4;

/// Rendered maps. The background is black with zero depth and normal.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput<T> {
    pub color: Image<T>,
    pub depth: Image<T>,
    pub normal: Image<T>,
    pub alpha: Image<T>,
}

impl<T: Real> RenderOutput<T> {
    fn new(width: usize, height: usize) -> Self {
        Self {
            color: Image::new(width, height, 3),
            depth: Image::new(width, height, 1),
            normal: Image::new(width, height, 3),
            alpha: Image::new(width, height, 1),
        }
    }

    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Largest absolute difference over all four maps.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.color
            .max_abs_diff(&other.color)
            .max(self.depth.max_abs_diff(&other.depth))
            .max(self.normal.max_abs_diff(&other.normal))
            .max(self.alpha.max_abs_diff(&other.alpha))
    }
}

/// Per-tile splat lists, each sorted by camera depth ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBins {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Row-major tiles; entries index into the projected splat list.
    pub lists: Vec<Vec<u32>>,
}

impl TileBins {
    pub fn tile(&self, tx: usize, ty: usize) -> &[u32] {
        &self.lists[ty * self.tiles_x + tx]
    }
}

/// Forward state retained for the backward pass.
#[derive(Debug, Clone)]
pub struct RenderState<T> {
    pub width: usize,
    pub height: usize,
    pub projected: Vec<ProjectedSplat<T>>,
    pub bins: TileBins,
    /// Transmittance left after blending, per pixel.
    pub final_transmittance: Vec<T>,
    /// Number of tile-list entries visited per pixel.
    pub n_contrib: Vec<u32>,
    /// Hash of the supporting splat indices per pixel.
    pub support_hash: Vec<u64>,
}

impl<T: Real> RenderState<T> {
    /// Fingerprint of which splats touched which pixels. Two renders with equal
    /// signatures share the same blending structure, so the output is a smooth
    /// function of the parameters between them.
    pub fn signature(&self) -> u64 {
        self.support_hash
            .iter()
            .zip(&self.n_contrib)
            .fold(0xcbf2_9ce4_8422_2325u64, |h, (&s, &n)| {
                (h ^ s ^ ((n as u64) << 40)).wrapping_mul(0x0000_0100_0000_01b3)
            })
    }

    /// Original splat indices of every splat rendered into at least one pixel.
    pub fn visible_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.projected.len()];
        for list in &self.bins.lists {
            for &k in list {
                seen[k as usize] = true;
            }
        }
        self.projected
            .iter()
            .zip(seen)
            .filter(|(_, s)| *s)
            .map(|(p, _)| p.index)
            .collect()
    }
}

/// Projects, culls (optionally) and bins the splats.
pub fn prepare<T: Real>(
    splats: &SplatSet<T>,
    camera: &Camera<T>,
    cull: Option<&CullConfig>,
) -> Result<(Vec<ProjectedSplat<T>>, TileBins)> {
    camera.validate()?;
    splats.validate()?;
    let mut projected = Vec::with_capacity(splats.len());
    for (i, s) in splats.iter().enumerate() {
        if let Some(p) = project_splat(i, s, camera)? {
            projected.push(p);
        }
    }
    if let Some(cfg) = cull {
        let keep = cull_mask_projected(&projected, camera.width, camera.height, cfg);
        projected = projected.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
    }
    let bins = bin_projected(&projected, camera.width, camera.height);
    Ok((projected, bins))
}

/// Sorts projected splats by depth (ties by original index) and assigns them
/// to every 16×16 tile their support bounding box overlaps.
pub fn bin_projected<T: Real>(projected: &[ProjectedSplat<T>], width: usize, height: usize) -> TileBins {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let mut order: Vec<u32> = (0..projected.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&projected[a as usize], &projected[b as usize]);
        pa.depth
            .partial_cmp(&pb.depth)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(pa.index.cmp(&pb.index))
    });
    let mut lists = vec![Vec::new(); tiles_x * tiles_y];
    for k in order {
        let p = &projected[k as usize];
        let Some((c0, r0, c1, r1)) = p.pixel_bounds(width, height) else {
            continue;
        };
        for ty in r0 / TILE_SIZE..=r1 / TILE_SIZE {
            for tx in c0 / TILE_SIZE..=c1 / TILE_SIZE {
                lists[ty * tiles_x + tx].push(k);
            }
        }
    }
    TileBins { tiles_x, tiles_y, lists }
}

/// Per-tile ordered lists of original splat indices.
pub fn depth_sort_and_tile<T: Real>(splats: &SplatSet<T>, camera: &Camera<T>) -> Result<Vec<Vec<usize>>> {
    let (projected, bins) = prepare(splats, camera, None)?;
    Ok(bins
        .lists
        .iter()
        .map(|l| l.iter().map(|&k| projected[k as usize].index).collect())
        .collect())
}

pub(crate) struct PixelResult<T> {
    pub color: Vec3<T>,
    pub depth: T,
    pub normal: Vec3<T>,
    pub transmittance: T,
    pub n_contrib: u32,
    pub hash: u64,
}

#[inline]
pub(crate) fn pixel_center<T: Real>(row: usize, col: usize) -> (T, T) {
    let half = T::lit(0.5);
    (T::from_usize_lossy(col) + half, T::from_usize_lossy(row) + half)
}

pub(crate) fn composite_pixel<T: Real>(list: &[u32], projected: &[ProjectedSplat<T>], px: T, py: T) -> PixelResult<T> {
    let eps = T::lit(TRANSMITTANCE_EPS);
    let half = T::lit(0.5);
    let mut t = T::one();
    let mut color = Vec3::zero();
    let mut depth = T::zero();
    let mut normal = Vec3::zero();
    let mut hash = 0u64;
    let mut n_contrib = 0u32;
    for (k, &idx) in list.iter().enumerate() {
        let p = &projected[idx as usize];
        let m2 = p.mahalanobis_sq(px, py);
        if !p.supports(m2) {
            continue;
        }
        let alpha = p.opacity * (-half * m2).exp();
        let w = t * alpha;
        color += p.color.scale(w);
        depth += p.depth * w;
        normal += p.normal.scale(w);
        hash = hash.wrapping_mul(31).wrapping_add(p.index as u64 + 1);
        t *= T::one() - alpha;
        n_contrib = k as u32 + 1;
        if t < eps {
            break;
        }
    }
    PixelResult {
        color,
        depth,
        normal,
        transmittance: t,
        n_contrib,
        hash,
    }
}

/// Renders color, depth, normal and alpha maps, keeping the forward state.
pub fn rasterize_with_state<T: Real>(
    splats: &SplatSet<T>,
    camera: &Camera<T>,
    cull: Option<&CullConfig>,
) -> Result<(RenderOutput<T>, RenderState<T>)> {
    let (projected, bins) = prepare(splats, camera, cull)?;
    let (w, h) = (camera.width, camera.height);

    let tiles: Vec<Vec<(usize, PixelResult<T>)>> = (0..bins.lists.len())
        .into_par_iter()
        .map(|t| {
            let (tx, ty) = (t % bins.tiles_x, t / bins.tiles_x);
            let list = &bins.lists[t];
            let mut out = Vec::with_capacity(TILE_SIZE * TILE_SIZE);
            for row in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(h) {
                for col in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(w) {
                    let (px, py) = pixel_center(row, col);
                    out.push((row * w + col, composite_pixel(list, &projected, px, py)));
                }
            }
            out
        })
        .collect();

    let mut output = RenderOutput::new(w, h);
    let mut final_transmittance = vec![T::one(); w * h];
    let mut n_contrib = vec![0u32; w * h];
    let mut support_hash = vec![0u64; w * h];
    for (pix, r) in tiles.into_iter().flatten() {
        let (row, col) = (pix / w, pix % w);
        output.color.pixel_mut(row, col).copy_from_slice(&r.color.to_array());
        output.normal.pixel_mut(row, col).copy_from_slice(&r.normal.to_array());
        output.depth.set(row, col, 0, r.depth);
        output.alpha.set(row, col, 0, T::one() - r.transmittance);
        final_transmittance[pix] = r.transmittance;
        n_contrib[pix] = r.n_contrib;
        support_hash[pix] = r.hash;
    }
    let state = RenderState {
        width: w,
        height: h,
        projected,
        bins,
        final_transmittance,
        n_contrib,
        support_hash,
    };
    Ok((output, state))
}

/// Renders color, depth, normal and alpha maps.
pub fn rasterize<T: Real>(splats: &SplatSet<T>, camera: &Camera<T>, cull: Option<&CullConfig>) -> Result<RenderOutput<T>> {
    rasterize_with_state(splats, camera, cull).map(|(o, _)| o)
}
