//! Dense row-major images and boolean masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major `height × width × channels` image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, T::zero())
    }

    pub fn filled(width: usize, height: usize, channels: usize, v: T) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![v; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::InvalidParameter(format!(
                "image buffer has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        (row * self.width + col) * self.channels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[self.idx(row, col) + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: T) {
        let i = self.idx(row, col) + ch;
        self.data[i] = v;
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[T] {
        let i = self.idx(row, col);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [T] {
        let i = self.idx(row, col);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn ensure_same_shape<U>(&self, other: &Image<U>) -> Result<()> {
        if self.width != other.width || self.height != other.height || self.channels != other.channels {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: (other.height, other.width, other.channels),
            });
        }
        Ok(())
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        self.map(|v| U::lit(v.as_f64()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Quantizes a 3-channel image in `[0,1]` to packed RGB8.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp01().as_f64() * 255.0).round() as u8)
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| T::lit(b as f64 / 255.0)).collect();
        Self::from_vec(width, height, 3, data)
    }

    /// Nearest-neighbour resampling, used for observation downscaling.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        let mut out = Self::new(width, height, self.channels);
        for r in 0..height {
            let sr = (r * self.height) / height;
            for c in 0..width {
                let sc = (c * self.width) / width;
                let src = self.idx(sr, sc);
                let dst = out.idx(r, c);
                out.data[dst..dst + self.channels].copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        out
    }
}

/// Per-pixel boolean mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn ensure_matches<T: Real>(&self, image: &Image<T>) -> Result<()> {
        if self.width != image.width || self.height != image.height {
            return Err(Error::DimensionMismatch {
                expected: (image.height, image.width, 1),
                got: (self.height, self.width, 1),
            });
        }
        Ok(())
    }
}

/// Peak signal-to-noise ratio in dB for images with range `[0,1]`.
pub fn psnr<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum::<f64>()
        / a.data.len().max(1) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}
