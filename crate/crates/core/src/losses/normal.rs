//! Normal supervision and neighbour-consistency regularization.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::linalg::{Mat3, Vec3};
use crate::losses::LossEval;
use crate::scalar::Real;

/// Pseudo ground-truth normals in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoNormals<T> {
    pub normals: Image<T>,
    pub valid: Mask,
}

/// Default half-width of the PCA window (5×5).
pub const DEFAULT_PCA_RADIUS: usize = 2;

/// Below this norm a rendered normal is treated as absent.
const NORMAL_NORM_FLOOR: f64 = 1e-12;

#[inline]
fn read3<T: Real>(img: &Image<T>, pix: usize) -> Vec3<T> {
    Vec3::new(img.data[pix * 3], img.data[pix * 3 + 1], img.data[pix * 3 + 2])
}

/// Unit vector and norm, or `None` for a vanishing vector.
#[inline]
fn unit<T: Real>(v: Vec3<T>) -> Option<(Vec3<T>, T)> {
    let n = v.norm();
    (n > T::lit(NORMAL_NORM_FLOOR)).then(|| (v.scale(T::one() / n), n))
}

/// Gradient of `g·u` through `u = v/|v|`.
#[inline]
fn normalize_backward<T: Real>(u: Vec3<T>, norm: T, g: Vec3<T>) -> Vec3<T> {
    (g - u.scale(u.dot(g))).scale(T::one() / norm)
}

/// `1 − mean cos(N̂, N)` over pixels where the pseudo normal is valid.
pub fn normal_loss<T: Real>(rendered: &Image<T>, pseudo: &PseudoNormals<T>) -> Result<LossEval<T>> {
    rendered.ensure_same_shape(&pseudo.normals)?;
    pseudo.valid.ensure_matches(rendered)?;
    let count = pseudo.valid.count();
    if count == 0 {
        return Err(Error::EmptySupport("no valid pseudo normals"));
    }
    let inv = T::one() / T::from_usize_lossy(count);
    let mut sum = T::zero();
    let mut grad = Image::new(rendered.width, rendered.height, 3);
    for pix in 0..rendered.num_pixels() {
        if !pseudo.valid.data[pix] {
            continue;
        }
        let target = read3(&pseudo.normals, pix).normalized();
        if let Some((u, n)) = unit(read3(rendered, pix)) {
            sum += u.dot(target);
            let g = normalize_backward(u, n, target.scale(-inv));
            grad.data[pix * 3..pix * 3 + 3].copy_from_slice(&g.to_array());
        }
    }
    Ok(LossEval {
        value: T::one() - sum * inv,
        grad,
        empty_support: false,
    })
}

/// Per-pixel weights `clamp(1 − |∇D|, 0, 1)` from forward differences of the
/// min-max normalized depth. Differences past the last row/column are zero.
pub fn depth_gradient_weights<T: Real>(depth: &Image<T>) -> Vec<T> {
    let (w, h) = (depth.width, depth.height);
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for &d in &depth.data {
        if d.is_finite() {
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    let range = hi - lo;
    let norm = |d: T| {
        if range > T::zero() && d.is_finite() {
            (d - lo) / range
        } else {
            T::zero()
        }
    };
    let mut weights = vec![T::zero(); w * h];
    for r in 0..h {
        for c in 0..w {
            let d = norm(depth.data[r * w + c]);
            let gx = if c + 1 < w { norm(depth.data[r * w + c + 1]) - d } else { T::zero() };
            let gy = if r + 1 < h { norm(depth.data[(r + 1) * w + c]) - d } else { T::zero() };
            weights[r * w + c] = (T::one() - (gx * gx + gy * gy).sqrt()).clamp01();
        }
    }
    weights
}

/// Depth-gradient-weighted mean of `1 − N̂ᵢⱼ·N̂ₙ` over right and bottom
/// neighbours. Zero when the total weight vanishes.
pub fn geo_consistency_loss<T: Real>(rendered: &Image<T>, predicted_depth: &Image<T>) -> Result<LossEval<T>> {
    let (w, h) = (rendered.width, rendered.height);
    if w < 2 || h < 2 {
        return Err(Error::InvalidParameter("geometry-consistency loss needs at least 2x2 pixels".into()));
    }
    if rendered.channels != 3 || predicted_depth.width != w || predicted_depth.height != h || predicted_depth.channels != 1 {
        return Err(Error::DimensionMismatch {
            expected: (h, w, 1),
            got: predicted_depth.shape(),
        });
    }
    let weights = depth_gradient_weights(predicted_depth);
    let units: Vec<Option<(Vec3<T>, T)>> = (0..w * h).map(|p| unit(read3(rendered, p))).collect();

    let mut wsum = T::zero();
    let mut acc = T::zero();
    let mut g_unit = vec![Vec3::zero(); w * h];
    for r in 0..h {
        for c in 0..w {
            let pix = r * w + c;
            let wt = weights[pix];
            let mut neighbours = [None, None];
            if c + 1 < w {
                neighbours[0] = Some(pix + 1);
            }
            if r + 1 < h {
                neighbours[1] = Some(pix + w);
            }
            for nb in neighbours.into_iter().flatten() {
                wsum += wt;
                if wt == T::zero() {
                    continue;
                }
                let ua = units[pix].map_or(Vec3::zero(), |u| u.0);
                let ub = units[nb].map_or(Vec3::zero(), |u| u.0);
                acc += wt * (T::one() - ua.dot(ub));
                g_unit[pix] -= ub.scale(wt);
                g_unit[nb] -= ua.scale(wt);
            }
        }
    }
    let mut grad = Image::new(w, h, 3);
    if wsum == T::zero() {
        return Ok(LossEval {
            value: T::zero(),
            grad,
            empty_support: true,
        });
    }
    let inv = T::one() / wsum;
    for pix in 0..w * h {
        if let Some((u, n)) = units[pix] {
            let g = normalize_backward(u, n, g_unit[pix].scale(inv));
            grad.data[pix * 3..pix * 3 + 3].copy_from_slice(&g.to_array());
        }
    }
    Ok(LossEval {
        value: acc * inv,
        grad,
        empty_support: false,
    })
}

/// Camera-frame normals from a depth map by PCA over back-projected points in
/// a `(2k+1)²` window, oriented toward the camera.
pub fn pseudo_normals_from_depth<T: Real>(depth: &Image<T>, camera: &Camera<T>, radius: usize) -> PseudoNormals<T> {
    let (w, h) = (depth.width, depth.height);
    let valid_depth = |p: usize| {
        let d = depth.data[p];
        d.is_finite() && d > T::zero()
    };
    let points: Vec<Vec3<T>> = (0..w * h)
        .map(|p| camera.unproject(p / w, p % w, depth.data[p]))
        .collect();

    let mut normals = Image::new(w, h, 3);
    let mut valid = Mask::new(w, h, false);
    for r in 0..h {
        for c in 0..w {
            let pix = r * w + c;
            if !valid_depth(pix) {
                continue;
            }
            let mut neigh = Vec::with_capacity((2 * radius + 1).pow(2));
            for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
                for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                    let q = rr * w + cc;
                    if valid_depth(q) {
                        neigh.push(points[q]);
                    }
                }
            }
            if neigh.len() < 3 {
                continue;
            }
            let n = T::from_usize_lossy(neigh.len());
            let mut mean = Vec3::zero();
            for p in &neigh {
                mean += *p;
            }
            mean = mean.scale(T::one() / n);
            let mut cov = Mat3::<T>::zero();
            for p in &neigh {
                let d = *p - mean;
                for i in 0..3 {
                    for j in 0..3 {
                        cov.m[i][j] += d[i] * d[j];
                    }
                }
            }
            let (vals, vecs) = cov.symmetric_eigen();
            // A line or a point has no defined plane.
            let scale = vals.x.abs() + vals.y.abs() + vals.z.abs();
            if !(vals.y > T::lit(1e-9) * scale) {
                continue;
            }
            let mut nrm = vecs.col(0).normalized();
            if nrm.dot(points[pix]) > T::zero() {
                nrm = -nrm;
            }
            normals.data[pix * 3..pix * 3 + 3].copy_from_slice(&nrm.to_array());
            valid.data[pix] = true;
        }
    }
    PseudoNormals { normals, valid }
}
