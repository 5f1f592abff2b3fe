//! Photometric loss: `0.8·L1 + 0.2·(1 − SSIM)` over unmasked pixels.

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::losses::LossEval;
use crate::scalar::Real;

pub const L1_WEIGHT: f64 = 0.8;
pub const DSSIM_WEIGHT: f64 = 0.2;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_kernel<T: Real>() -> Vec<T> {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / s)).collect()
}

/// Separable "same" convolution of a single-channel plane with zero padding.
fn blur<T: Real>(plane: &[T], width: usize, height: usize, kernel: &[T]) -> Vec<T> {
    let r = kernel.len() / 2;
    let mut tmp = vec![T::zero(); plane.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = T::zero();
            for (k, &g) in kernel.iter().enumerate() {
                let c = col as isize + k as isize - r as isize;
                if c >= 0 && (c as usize) < width {
                    acc += g * plane[row * width + c as usize];
                }
            }
            tmp[row * width + col] = acc;
        }
    }
    let mut out = vec![T::zero(); plane.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = T::zero();
            for (k, &g) in kernel.iter().enumerate() {
                let rr = row as isize + k as isize - r as isize;
                if rr >= 0 && (rr as usize) < height {
                    acc += g * tmp[rr as usize * width + col];
                }
            }
            out[row * width + col] = acc;
        }
    }
    out
}

fn channel<T: Real>(img: &Image<T>, ch: usize) -> Vec<T> {
    img.data.iter().skip(ch).step_by(img.channels).copied().collect()
}

/// Mean SSIM over unmasked pixels and all channels, with the gradient with
/// respect to `x`. Returns `None` when nothing is unmasked.
pub fn ssim_with_grad<T: Real>(x: &Image<T>, y: &Image<T>, exclude: Option<&Mask>) -> Result<Option<(T, Image<T>)>> {
    x.ensure_same_shape(y)?;
    if let Some(m) = exclude {
        m.ensure_matches(x)?;
    }
    let (w, h, nc) = (x.width, x.height, x.channels);
    let valid: Vec<bool> = (0..w * h).map(|i| exclude.is_none_or(|m| !m.data[i])).collect();
    let count = valid.iter().filter(|&&v| v).count();
    if count == 0 {
        return Ok(None);
    }
    let kernel = gaussian_kernel::<T>();
    let norm = T::one() / T::from_usize_lossy(count * nc);
    let (c1, c2) = (T::lit(C1), T::lit(C2));
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut grad = Image::new(w, h, nc);
    for ch in 0..nc {
        let xs = channel(x, ch);
        let ys = channel(y, ch);
        let xx: Vec<T> = xs.iter().map(|&v| v * v).collect();
        let yy: Vec<T> = ys.iter().map(|&v| v * v).collect();
        let xy: Vec<T> = xs.iter().zip(&ys).map(|(&a, &b)| a * b).collect();
        let mu_x = blur(&xs, w, h, &kernel);
        let mu_y = blur(&ys, w, h, &kernel);
        let s_xx = blur(&xx, w, h, &kernel);
        let s_yy = blur(&yy, w, h, &kernel);
        let s_xy = blur(&xy, w, h, &kernel);

        let mut d_mu = vec![T::zero(); w * h];
        let mut d_sxx = vec![T::zero(); w * h];
        let mut d_sxy = vec![T::zero(); w * h];
        for i in 0..w * h {
            if !valid[i] {
                continue;
            }
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = s_xx[i] - mx * mx;
            let var_y = s_yy[i] - my * my;
            let cov = s_xy[i] - mx * my;
            let a1 = two * mx * my + c1;
            let a2 = two * cov + c2;
            let b1 = mx * mx + my * my + c1;
            let b2 = var_x + var_y + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            d_mu[i] = norm * s * (two * my / a1 - two * my / a2 - two * mx / b1 + two * mx / b2);
            d_sxx[i] = -norm * s / b2;
            d_sxy[i] = norm * two * s / a2;
        }
        // The Gaussian window is symmetric, so the adjoint is the same blur.
        let g_mu = blur(&d_mu, w, h, &kernel);
        let g_sxx = blur(&d_sxx, w, h, &kernel);
        let g_sxy = blur(&d_sxy, w, h, &kernel);
        for i in 0..w * h {
            grad.data[i * nc + ch] = g_mu[i] + two * xs[i] * g_sxx[i] + ys[i] * g_sxy[i];
        }
    }
    Ok(Some((total * norm, grad)))
}

/// Mean SSIM over all pixels and channels.
pub fn ssim<T: Real>(x: &Image<T>, y: &Image<T>) -> Result<T> {
    ssim_with_grad(x, y, None)?
        .map(|(v, _)| v)
        .ok_or(Error::EmptySupport("ssim over an empty image"))
}

/// `0.8·L1 + 0.2·(1 − SSIM)` with its gradient with respect to `rendered`.
/// A fully masked frame yields zero with `empty_support` set.
pub fn rgb_loss<T: Real>(rendered: &Image<T>, target: &Image<T>, exclude: Option<&Mask>) -> Result<LossEval<T>> {
    rendered.ensure_same_shape(target)?;
    let Some((ssim_val, ssim_grad)) = ssim_with_grad(rendered, target, exclude)? else {
        return Ok(LossEval {
            value: T::zero(),
            grad: Image::new(rendered.width, rendered.height, rendered.channels),
            empty_support: true,
        });
    };
    let nc = rendered.channels;
    let valid = |pix: usize| exclude.is_none_or(|m| !m.data[pix]);
    let count = (0..rendered.num_pixels()).filter(|&p| valid(p)).count();
    let norm = T::one() / T::from_usize_lossy(count * nc);
    let (wl1, wd) = (T::lit(L1_WEIGHT), T::lit(DSSIM_WEIGHT));
    let mut l1 = T::zero();
    let mut grad = Image::new(rendered.width, rendered.height, nc);
    for (i, (&r, &t)) in rendered.data.iter().zip(&target.data).enumerate() {
        if !valid(i / nc) {
            continue;
        }
        let d = r - t;
        l1 += d.abs();
        let sign = if d > T::zero() {
            T::one()
        } else if d < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        grad.data[i] = wl1 * norm * sign - wd * ssim_grad.data[i];
    }
    Ok(LossEval {
        value: wl1 * l1 * norm + wd * (T::one() - ssim_val),
        grad,
        empty_support: false,
    })
}
