//! Patch-wise normalized cross-correlation between rendered and predicted
//! depth. Invariant to any per-patch affine rescaling of either map, so a
//! monocular prior with unknown scale and shift can supervise geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::losses::LossEval;
use crate::scalar::Real;

pub const DEFAULT_PATCH_SIZE: usize = 11;
pub const DEFAULT_PATCH_STRIDE: usize = 8;
/// Patches whose standard deviation falls below this are dropped.
pub const NCC_STD_FLOOR: f64 = 1e-6;

/// Square patches of odd size laid on a regular stride, fully inside the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub size: usize,
    pub stride: usize,
    /// Top-left `(row, col)` of every patch.
    pub origins: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn new(size: usize, stride: usize, width: usize, height: usize) -> Result<Self> {
        if size < 3 || size % 2 == 0 {
            return Err(Error::InvalidParameter(format!("patch size must be odd and >= 3, got {size}")));
        }
        if stride == 0 {
            return Err(Error::InvalidParameter("patch stride must be positive".into()));
        }
        if size > width || size > height {
            return Err(Error::InvalidParameter(format!(
                "patch size {size} exceeds image {width}x{height}"
            )));
        }
        let origins = (0..=height - size)
            .step_by(stride)
            .flat_map(|r| (0..=width - size).step_by(stride).map(move |c| (r, c)))
            .collect();
        Ok(Self { size, stride, origins })
    }

    pub fn default_for(width: usize, height: usize) -> Result<Self> {
        Self::new(DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE, width, height)
    }
}

/// `1 − mean_p ncc_p` with the gradient with respect to `rendered`.
pub fn ncc_depth_loss<T: Real>(
    rendered: &Image<T>,
    predicted: &Image<T>,
    patches: &PatchGrid,
    exclude: Option<&Mask>,
) -> Result<LossEval<T>> {
    rendered.ensure_same_shape(predicted)?;
    if let Some(m) = exclude {
        m.ensure_matches(rendered)?;
    }
    let w = rendered.width;
    let k = patches.size;
    let n = T::from_usize_lossy(k * k);
    let floor = T::lit(NCC_STD_FLOOR);

    let mut used: Vec<(usize, usize, T, Vec<T>)> = Vec::new();
    let mut sum_ncc = T::zero();
    let mut a = vec![T::zero(); k * k];
    let mut b = vec![T::zero(); k * k];
    'patch: for &(r0, c0) in &patches.origins {
        if r0 + k > rendered.height || c0 + k > w {
            return Err(Error::InvalidParameter("patch outside image".into()));
        }
        let mut ma = T::zero();
        let mut mb = T::zero();
        for i in 0..k {
            for j in 0..k {
                let pix = (r0 + i) * w + c0 + j;
                if exclude.is_some_and(|m| m.data[pix]) {
                    continue 'patch;
                }
                a[i * k + j] = rendered.data[pix];
                b[i * k + j] = predicted.data[pix];
                ma += rendered.data[pix];
                mb += predicted.data[pix];
            }
        }
        ma /= n;
        mb /= n;
        let (mut saa, mut sbb, mut sab) = (T::zero(), T::zero(), T::zero());
        for t in 0..k * k {
            a[t] -= ma;
            b[t] -= mb;
            saa += a[t] * a[t];
            sbb += b[t] * b[t];
            sab += a[t] * b[t];
        }
        if (saa / n).sqrt() < floor || (sbb / n).sqrt() < floor {
            continue;
        }
        let na = saa.sqrt();
        let nb = sbb.sqrt();
        let ncc = sab / (na * nb);
        sum_ncc += ncc;
        // d ncc / d a = b/(|a||b|) − ncc·a/|a|²; already zero-mean, so the
        // centering Jacobian leaves it unchanged.
        let g: Vec<T> = (0..k * k).map(|t| b[t] / (na * nb) - ncc * a[t] / saa).collect();
        used.push((r0, c0, ncc, g));
    }
    if used.is_empty() {
        return Err(Error::EmptySupport("no usable depth patches"));
    }
    let count = T::from_usize_lossy(used.len());
    let mut grad = Image::new(rendered.width, rendered.height, 1);
    for (r0, c0, _, g) in &used {
        for i in 0..k {
            for j in 0..k {
                grad.data[(r0 + i) * w + c0 + j] -= g[i * k + j] / count;
            }
        }
    }
    Ok(LossEval {
        value: T::one() - sum_ncc / count,
        grad,
        empty_support: false,
    })
}
