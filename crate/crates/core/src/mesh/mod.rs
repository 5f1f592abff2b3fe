//! Collision-mesh extraction: TSDF fusion of rendered depth, marching cubes
//! and ground removal.

pub mod ground;
pub mod mc;
mod tables;
pub mod trimesh;
pub mod tsdf;

pub use ground::{
    connected_ground, default_seed_region, ground_faces_from_masks, ground_faces_from_vector, ground_mask, remove_ground, GroundMask,
    GroundRemoval, GroundView, VectorGround, DEFAULT_GROUND_ANGLE_DEG, DEFAULT_MAX_REL_JUMP,
};
pub use mc::marching_cubes;
pub use trimesh::{box_mesh, sidecar_path, TriangleMesh, P3};
pub use tsdf::{TsdfVolume, DEFAULT_TRUNCATION, DEFAULT_VOXEL_SIZE};

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::raster::{rasterize, RenderOutput};
use crate::scalar::Real;
use crate::splat::SplatSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub voxel_size: f64,
    pub truncation: f64,
    /// Pixels with lower accumulated alpha are not fused.
    pub min_alpha: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            voxel_size: DEFAULT_VOXEL_SIZE,
            truncation: DEFAULT_TRUNCATION,
            min_alpha: 0.5,
        }
    }
}

/// Alpha-normalized rendered depth; zero (invalid) where alpha < `min_alpha`.
pub fn fusable_depth<T: Real>(render: &RenderOutput<T>, min_alpha: f64) -> Image<T> {
    let mut d = render.depth.clone();
    for (v, &a) in d.data.iter_mut().zip(&render.alpha.data) {
        *v = if a.as_f64() >= min_alpha { *v / a } else { T::zero() };
    }
    d
}

/// Renders depth from every camera and fuses it into a volume spanning the
/// splat centers.
pub fn fuse_splats<T: Real>(splats: &SplatSet<T>, cameras: &[Camera<T>], cfg: &FusionConfig) -> Result<TsdfVolume> {
    let (lo, hi) = splats
        .bounds()
        .ok_or_else(|| Error::InvalidParameter("no splats to fuse".into()))?;
    let lo = [lo.x.as_f64(), lo.y.as_f64(), lo.z.as_f64()];
    let hi = [hi.x.as_f64(), hi.y.as_f64(), hi.z.as_f64()];
    let mut vol = TsdfVolume::from_bounds(lo, hi, cfg.voxel_size, cfg.truncation)?;
    for cam in cameras {
        let r = rasterize(splats, cam, None)?;
        vol.integrate(&fusable_depth(&r, cfg.min_alpha), cam, None)?;
    }
    Ok(vol)
}

/// Fusion followed by marching cubes.
pub fn extract_mesh<T: Real>(splats: &SplatSet<T>, cameras: &[Camera<T>], cfg: &FusionConfig) -> Result<TriangleMesh> {
    Ok(marching_cubes(&fuse_splats(splats, cameras, cfg)?))
}
