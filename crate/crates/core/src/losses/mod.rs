//! Training objectives: photometric, scale-invariant depth, normal,
//! neighbour-consistency and flatness terms, plus their weighted sum.

mod ncc;
mod normal;
mod rgb;

pub use ncc::{ncc_depth_loss, PatchGrid, DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE, NCC_STD_FLOOR};
pub use normal::{
    depth_gradient_weights, geo_consistency_loss, normal_loss, pseudo_normals_from_depth, PseudoNormals,
    DEFAULT_PCA_RADIUS,
};
pub use rgb::{rgb_loss, ssim, ssim_with_grad, DSSIM_WEIGHT, L1_WEIGHT};

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::linalg::Vec3;
use crate::scalar::Real;
use crate::splat::SplatSet;

/// A loss value together with its gradient with respect to the image input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<T> {
    pub value: T,
    pub grad: Image<T>,
    /// Set when nothing contributed and the value defaulted to zero.
    pub empty_support: bool,
}

/// `(1/N)·Σ min(s₁, s₂, s₃)` with its gradient per splat scale vector.
pub fn scale_loss<T: Real>(splats: &SplatSet<T>) -> (T, Vec<Vec3<T>>) {
    if splats.is_empty() {
        return (T::zero(), Vec::new());
    }
    let inv = T::one() / T::from_usize_lossy(splats.len());
    let mut sum = T::zero();
    let grads = splats
        .iter()
        .map(|s| {
            sum += s.scales.min_component();
            let mut g = Vec3::zero();
            g[s.scales.argmin()] = inv;
            g
        })
        .collect();
    (sum * inv, grads)
}

/// Term weights of the total objective. The photometric term has weight 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub depth: f64,
    pub normal: f64,
    pub geo: f64,
    pub scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            depth: 0.5,
            normal: 0.1,
            geo: 0.05,
            scale: 10.0,
        }
    }
}

/// Unweighted component values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rgb: f64,
    pub depth: f64,
    pub normal: f64,
    pub geo: f64,
    pub scale: f64,
}

impl LossBreakdown {
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        self.rgb + w.depth * self.depth + w.normal * self.normal + w.geo * self.geo + w.scale * self.scale
    }

    pub fn is_finite(&self) -> bool {
        [self.rgb, self.depth, self.normal, self.geo, self.scale]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Weighted sum of the components and the unweighted breakdown.
pub fn total_loss(breakdown: LossBreakdown, weights: &LossWeights) -> (f64, LossBreakdown) {
    (breakdown.weighted_total(weights), breakdown)
}
