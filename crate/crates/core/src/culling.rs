//! Screen-space covariance culling.
//!
//! A splat is dropped when the largest absolute entry of its dilated 2D
//! covariance exceeds `alpha · width · height`. Oversized screen footprints
//! at unusual viewpoints are almost always floaters close to the camera.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::projection::{project_splat, ProjectedSplat};
use crate::scalar::Real;
use crate::splat::SplatSet;

pub const DEFAULT_CULL_ALPHA: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CullConfig {
    pub alpha: f64,
    pub enabled: bool,
}

impl Default for CullConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_CULL_ALPHA,
            enabled: true,
        }
    }
}

impl CullConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self { alpha, enabled: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("cull alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Max-norm threshold in squared pixels for an image of the given size.
    pub fn threshold(&self, width: usize, height: usize) -> f64 {
        self.alpha * (width * height) as f64
    }
}

/// Focal division applied by [`stress_view`].
pub const STRESS_FOCAL_DIVISOR: f64 = 1.5;

/// An unusual viewpoint for probing floaters: wider field of view and the
/// camera center lowered by `drop` along world `-z`.
pub fn stress_view<T: Real>(camera: &Camera<T>, drop: f64) -> Camera<T> {
    camera
        .with_focal_divided(T::lit(STRESS_FOCAL_DIVISOR))
        .translated_world(Vec3::new(T::zero(), T::zero(), T::lit(-drop)))
}

#[inline]
pub fn exceeds_threshold<T: Real>(p: &ProjectedSplat<T>, threshold: f64) -> bool {
    p.cov2d.max_abs_entry().as_f64() > threshold
}

pub(crate) fn cull_mask_projected<T: Real>(
    projected: &[ProjectedSplat<T>],
    width: usize,
    height: usize,
    cfg: &CullConfig,
) -> Vec<bool> {
    if !cfg.enabled {
        return vec![true; projected.len()];
    }
    let thr = cfg.threshold(width, height);
    projected.iter().map(|p| !exceeds_threshold(p, thr)).collect()
}

/// Keep-mask over the whole splat set. Splats behind the near plane are never
/// rendered anyway and are reported as kept.
pub fn cull_mask<T: Real>(splats: &SplatSet<T>, camera: &Camera<T>, cfg: &CullConfig) -> Result<Vec<bool>> {
    if !cfg.enabled {
        return Ok(vec![true; splats.len()]);
    }
    cfg.validate()?;
    let thr = cfg.threshold(camera.width, camera.height);
    let mut keep = Vec::with_capacity(splats.len());
    for (i, s) in splats.iter().enumerate() {
        let k = match project_splat(i, s, camera)? {
            Some(p) => !exceeds_threshold(&p, thr),
            None => true,
        };
        keep.push(k);
    }
    Ok(keep)
}
