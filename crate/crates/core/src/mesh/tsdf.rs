//! Truncated signed distance fusion of depth maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::mesh::trimesh::P3;
use crate::scalar::Real;

pub const DEFAULT_VOXEL_SIZE: f64 = 0.1;
pub const DEFAULT_TRUNCATION: f64 = 0.4;

/// Regular grid of signed distances sampled at `origin + (i, j, k)·voxel_size`.
/// Positive values lie in observed free space, negative behind surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsdfVolume {
    pub voxel_size: f64,
    pub truncation: f64,
    pub origin: P3,
    pub dims: [usize; 3],
    pub sdf: Vec<f64>,
    pub weight: Vec<f64>,
}

impl TsdfVolume {
    pub fn new(origin: P3, dims: [usize; 3], voxel_size: f64, truncation: f64) -> Result<Self> {
        if !(voxel_size > 0.0) {
            return Err(Error::InvalidParameter(format!("voxel size must be positive, got {voxel_size}")));
        }
        if !(truncation >= 2.0 * voxel_size) {
            return Err(Error::InvalidParameter(format!(
                "truncation {truncation} must be at least twice the voxel size {voxel_size}"
            )));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidParameter(format!("volume needs at least 2 samples per axis, got {dims:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            voxel_size,
            truncation,
            origin,
            dims,
            sdf: vec![truncation; n],
            weight: vec![0.0; n],
        })
    }

    /// Volume covering `[lo, hi]` padded by the truncation distance.
    pub fn from_bounds(lo: P3, hi: P3, voxel_size: f64, truncation: f64) -> Result<Self> {
        let pad = truncation;
        let origin = [lo[0] - pad, lo[1] - pad, lo[2] - pad];
        let dims = [0, 1, 2].map(|k| (((hi[k] - lo[k] + 2.0 * pad) / voxel_size).ceil() as usize + 1).max(2));
        Self::new(origin, dims, voxel_size, truncation)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> P3 {
        [
            self.origin[0] + i as f64 * self.voxel_size,
            self.origin[1] + j as f64 * self.voxel_size,
            self.origin[2] + k as f64 * self.voxel_size,
        ]
    }

    pub fn len(&self) -> usize {
        self.sdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sdf.is_empty()
    }

    /// Fuses one depth map. Pixels with non-positive or non-finite depth, or
    /// set in `exclude`, are skipped. Returns the number of voxels updated.
    pub fn integrate<T: Real>(&mut self, depth: &Image<T>, camera: &Camera<T>, exclude: Option<&Mask>) -> Result<usize> {
        if depth.channels != 1 || depth.width != camera.width || depth.height != camera.height {
            return Err(Error::DimensionMismatch {
                expected: (camera.height, camera.width, 1),
                got: depth.shape(),
            });
        }
        if let Some(m) = exclude {
            m.ensure_matches(depth)?;
        }
        let cam = camera.cast::<f64>();
        let trunc = self.truncation;
        let (nx, ny) = (self.dims[0], self.dims[1]);
        let slab = nx * ny;
        let (w, h) = (cam.width, cam.height);
        let origin = self.origin;
        let vs = self.voxel_size;
        let updated: usize = self
            .sdf
            .par_chunks_mut(slab)
            .zip(self.weight.par_chunks_mut(slab))
            .enumerate()
            .map(|(k, (sdf, weight))| {
                let mut n = 0;
                for j in 0..ny {
                    for i in 0..nx {
                        let p = crate::linalg::Vec3::new(
                            origin[0] + i as f64 * vs,
                            origin[1] + j as f64 * vs,
                            origin[2] + k as f64 * vs,
                        );
                        let pc = cam.world_to_camera(p);
                        if pc.z <= 0.0 {
                            continue;
                        }
                        let (u, v) = cam.project(pc);
                        if !(u >= 0.0 && v >= 0.0) {
                            continue;
                        }
                        let (col, row) = (u.floor() as usize, v.floor() as usize);
                        if col >= w || row >= h {
                            continue;
                        }
                        let pix = row * w + col;
                        if exclude.is_some_and(|m| m.data[pix]) {
                            continue;
                        }
                        let d = depth.data[pix].as_f64();
                        if !(d.is_finite() && d > 0.0) {
                            continue;
                        }
                        let dist = d - pc.z;
                        if dist < -trunc {
                            continue;
                        }
                        let tsdf = dist.min(trunc);
                        let idx = j * nx + i;
                        let wt = weight[idx];
                        // The clamp only absorbs rounding at the band edge.
                        sdf[idx] = ((sdf[idx] * wt + tsdf) / (wt + 1.0)).clamp(-trunc, trunc);
                        weight[idx] = wt + 1.0;
                        n += 1;
                    }
                }
                n
            })
            .sum();
        Ok(updated)
    }

    /// Samples an analytic signed distance function, clamped to the
    /// truncation band, with unit weight everywhere.
    pub fn from_fn(origin: P3, dims: [usize; 3], voxel_size: f64, truncation: f64, f: impl Fn(P3) -> f64) -> Result<Self> {
        let mut v = Self::new(origin, dims, voxel_size, truncation)?;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = v.index(i, j, k);
                    v.sdf[idx] = f(v.position(i, j, k)).clamp(-truncation, truncation);
                    v.weight[idx] = 1.0;
                }
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_depth(z: f64, w: usize, h: usize) -> Image<f64> {
        Image::filled(w, h, 1, z)
    }

    fn volume() -> TsdfVolume {
        TsdfVolume::new([-1.0, -1.0, 0.5], [21, 21, 31], DEFAULT_VOXEL_SIZE, DEFAULT_TRUNCATION).unwrap()
    }

    #[test]
    fn rejects_thin_truncation() {
        assert!(TsdfVolume::new([0.0; 3], [4, 4, 4], 0.1, 0.15).is_err());
        assert!(TsdfVolume::new([0.0; 3], [4, 4, 4], 0.0, 0.4).is_err());
    }

    #[test]
    fn plane_zero_crossing_within_one_voxel() {
        let cam = Camera::identity_pose(40.0, 64, 64);
        let mut v = volume();
        v.integrate(&plane_depth(2.0, 64, 64), &cam, None).unwrap();
        let mut crossings = 0;
        for k in 0..v.dims[2] - 1 {
            let (a, b) = (v.index(10, 10, k), v.index(10, 10, k + 1));
            if v.weight[a] > 0.0 && v.weight[b] > 0.0 && (v.sdf[a] > 0.0) != (v.sdf[b] > 0.0) {
                let z = v.position(10, 10, k)[2];
                assert!((z - 2.0).abs() <= 0.1 + 1e-9, "crossing at {z}");
                crossings += 1;
            }
        }
        assert_eq!(crossings, 1);
        assert!(v.sdf.iter().all(|s| s.abs() <= v.truncation + 1e-12));
    }

    #[test]
    fn empty_depth_leaves_volume_unchanged() {
        let cam = Camera::identity_pose(40.0, 32, 32);
        let mut v = volume();
        let before = v.clone();
        assert_eq!(v.integrate(&Image::<f64>::new(32, 32, 1), &cam, None).unwrap(), 0);
        assert_eq!(v, before);
    }

    #[test]
    fn integrating_twice_is_a_fixed_point() {
        let cam = Camera::identity_pose(40.0, 32, 32);
        let depth = plane_depth(1.7, 32, 32);
        let mut v = volume();
        v.integrate(&depth, &cam, None).unwrap();
        let once = v.clone();
        v.integrate(&depth, &cam, None).unwrap();
        for i in 0..v.len() {
            assert!((v.sdf[i] - once.sdf[i]).abs() < 1e-12);
            assert_eq!(v.weight[i], 2.0 * once.weight[i]);
        }
    }

    #[test]
    fn masked_pixels_are_skipped() {
        let cam = Camera::identity_pose(40.0, 32, 32);
        let mut v = volume();
        let all = Mask::new(32, 32, true);
        assert_eq!(v.integrate(&plane_depth(2.0, 32, 32), &cam, Some(&all)).unwrap(), 0);
    }
}
