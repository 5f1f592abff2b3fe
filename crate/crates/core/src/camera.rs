//! Pinhole camera with a rigid world-to-camera transform.
//!
//! Camera frame follows the computer-vision convention: `+x` right, `+y`
//! down, `+z` forward. Pixel `(row, col)` has its center at image coordinates
//! `(col + 0.5, row + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    /// Rotation block of the world-to-camera transform.
    pub rotation: Mat3<T>,
    /// Translation of the world-to-camera transform.
    pub translation: Vec3<T>,
}

impl<T: Real> Camera<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize, rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        }
    }

    /// Camera at the world origin looking down `+z`, principal point centered.
    pub fn identity_pose(focal: T, width: usize, height: usize) -> Self {
        let half = T::lit(0.5);
        Self::new(
            focal,
            focal,
            T::from_usize_lossy(width) * half,
            T::from_usize_lossy(height) * half,
            width,
            height,
            Mat3::identity(),
            Vec3::zero(),
        )
    }

    /// Builds from a row-major 4×4 world-to-camera matrix.
    pub fn from_w2c_matrix(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize, w2c: &[T; 16]) -> Self {
        let rotation = Mat3::from_rows([
            [w2c[0], w2c[1], w2c[2]],
            [w2c[4], w2c[5], w2c[6]],
            [w2c[8], w2c[9], w2c[10]],
        ]);
        let translation = Vec3::new(w2c[3], w2c[7], w2c[11]);
        Self::new(fx, fy, cx, cy, width, height, rotation, translation)
    }

    pub fn w2c_matrix(&self) -> [T; 16] {
        let r = &self.rotation.m;
        let t = self.translation;
        let (z, o) = (T::zero(), T::one());
        [
            r[0][0], r[0][1], r[0][2], t.x, r[1][0], r[1][1], r[1][2], t.y, r[2][0], r[2][1], r[2][2], t.z, z, z, z, o,
        ]
    }

    /// Camera placed at `eye` looking at `target`, with `up` giving the
    /// approximate world-up direction.
    pub fn look_at(focal: T, width: usize, height: usize, eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Self {
        let forward = (target - eye).normalized();
        let mut right = forward.cross(up).normalized();
        if right.norm() == T::zero() {
            right = forward.cross(Vec3::new(T::one(), T::zero(), T::zero())).normalized();
        }
        let down = forward.cross(right);
        let rotation = Mat3::from_rows([right.to_array(), down.to_array(), forward.to_array()]);
        let translation = -rotation.mul_vec(eye);
        let mut cam = Self::identity_pose(focal, width, height);
        cam.rotation = rotation;
        cam.translation = translation;
        cam
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidParameter("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image size must be non-zero".into()));
        }
        if !self.rotation.is_finite() || !self.translation.is_finite() || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidParameter("non-finite camera parameter".into()));
        }
        let err = self.rotation.orthonormality_error();
        if err > T::lit(1e-6) {
            return Err(Error::InvalidParameter(format!(
                "world-to-camera rotation not orthonormal (error {err})"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    #[inline]
    pub fn camera_to_world(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(p - self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        self.camera_to_world(Vec3::zero())
    }

    /// Projects a camera-frame point to image coordinates.
    #[inline]
    pub fn project(&self, p: Vec3<T>) -> (T, T) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Camera-frame point at pixel center `(row, col)` with depth `z`.
    #[inline]
    pub fn unproject(&self, row: usize, col: usize, z: T) -> Vec3<T> {
        let half = T::lit(0.5);
        let u = T::from_usize_lossy(col) + half;
        let v = T::from_usize_lossy(row) + half;
        Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z)
    }

    /// Same pose with focal lengths divided by `factor`.
    pub fn with_focal_divided(&self, factor: T) -> Self {
        let mut c = *self;
        c.fx = c.fx / factor;
        c.fy = c.fy / factor;
        c
    }

    /// Same pose rendered at a different resolution; intrinsics rescaled.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = T::from_usize_lossy(width) / T::from_usize_lossy(self.width);
        let sy = T::from_usize_lossy(height) / T::from_usize_lossy(self.height);
        let mut c = *self;
        c.fx = c.fx * sx;
        c.cx = c.cx * sx;
        c.fy = c.fy * sy;
        c.cy = c.cy * sy;
        c.width = width;
        c.height = height;
        c
    }

    /// Moves the camera center by `offset` given in world coordinates.
    pub fn translated_world(&self, offset: Vec3<T>) -> Self {
        let mut c = *self;
        c.translation = c.translation - c.rotation.mul_vec(offset);
        c
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        Camera {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
            rotation: self.rotation.cast(),
            translation: self.translation.cast(),
        }
    }
}
