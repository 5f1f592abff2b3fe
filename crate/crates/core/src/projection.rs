//! Covariance construction and perspective projection of splats.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Quat, Sym2, Vec2, Vec3};
use crate::scalar::Real;
use crate::splat::Splat;

/// Near clipping depth in meters; splats closer than this are skipped.
pub const Z_NEAR: f64 = 0.01;
/// Isotropic low-pass floor added to every screen-space covariance.
pub const COV2D_DILATION: f64 = 0.3;
/// Influence radius in standard deviations used for binning and support.
pub const SUPPORT_SIGMAS: f64 = 3.0;

/// `R·S·Sᵀ·Rᵀ` for the rotation of `rotation` (normalized) and `S = diag(scales)`.
pub fn build_covariance<T: Real>(rotation: Quat<T>, scales: Vec3<T>) -> Result<Mat3<T>> {
    if !rotation.is_finite() || !scales.is_finite() || rotation.norm() == T::zero() {
        return Err(Error::InvalidParameter("non-finite rotation or scales".into()));
    }
    let r = rotation.to_rotation_matrix();
    let m = Mat3::from_cols(r.col(0).scale(scales.x), r.col(1).scale(scales.y), r.col(2).scale(scales.z));
    Ok(m.mul_mat(&m.transpose()))
}

/// Perspective Jacobian of the pinhole projection at camera-frame point `p`,
/// as its two rows.
pub fn perspective_jacobian<T: Real>(camera: &Camera<T>, p: Vec3<T>) -> [Vec3<T>; 2] {
    let iz = T::one() / p.z;
    let iz2 = iz * iz;
    [
        Vec3::new(camera.fx * iz, T::zero(), -camera.fx * p.x * iz2),
        Vec3::new(T::zero(), camera.fy * iz, -camera.fy * p.y * iz2),
    ]
}

/// Screen-space covariance `J·W·Σ·Wᵀ·Jᵀ` without the dilation floor, or
/// `None` when the mean lies in front of the near plane.
pub fn project_covariance<T: Real>(splat: &Splat<T>, camera: &Camera<T>) -> Result<Option<Sym2<T>>> {
    let p = camera.world_to_camera(splat.mean);
    if !(p.z > T::lit(Z_NEAR)) {
        return Ok(None);
    }
    let cov3 = build_covariance(splat.rotation, splat.scales)?;
    Ok(Some(screen_covariance(camera, p, &cov3)))
}

pub(crate) fn screen_covariance<T: Real>(camera: &Camera<T>, p: Vec3<T>, cov3: &Mat3<T>) -> Sym2<T> {
    let j = perspective_jacobian(camera, p);
    let w = &camera.rotation;
    // Rows of T = J·W.
    let t0 = w.transpose().mul_vec(j[0]);
    let t1 = w.transpose().mul_vec(j[1]);
    let s_t0 = cov3.mul_vec(t0);
    let s_t1 = cov3.mul_vec(t1);
    Sym2::new(t0.dot(s_t0), t0.dot(s_t1), t1.dot(s_t1))
}

/// `exp(-½ dᵀ Σ⁻¹ d)` with `d = pixel − mean`. `cov2d` is the (already
/// dilated) screen covariance.
pub fn gaussian_weight<T: Real>(mean: Vec2<T>, cov2d: Sym2<T>, pixel: Vec2<T>) -> Result<T> {
    let conic = cov2d.inverse().ok_or(Error::DegenerateSplat)?;
    let d = pixel - mean;
    Ok((-T::lit(0.5) * conic.quad_form(d)).exp())
}

/// Everything the rasterizer needs about one visible splat.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedSplat<T> {
    pub index: usize,
    /// Camera-frame center.
    pub p_cam: Vec3<T>,
    /// Image-plane center in pixels.
    pub mean2d: Vec2<T>,
    /// Dilated screen covariance.
    pub cov2d: Sym2<T>,
    /// Inverse of `cov2d`.
    pub conic: Sym2<T>,
    /// Camera depth (`z` of the camera-frame center).
    pub depth: T,
    /// Camera-frame unit normal facing the camera.
    pub normal: Vec3<T>,
    /// Local axis used as the normal (index of the smallest scale).
    pub normal_axis: usize,
    /// `+1` or `-1`: orientation applied so the normal faces the camera.
    pub normal_sign: T,
    /// Pixel radius of the support ellipse's bounding square.
    pub radius: T,
    pub opacity: T,
    pub color: Vec3<T>,
}

impl<T: Real> ProjectedSplat<T> {
    /// Axis-aligned pixel bounds of the support as `(col_min, row_min, col_max, row_max)`,
    /// inclusive, clipped to the image; `None` when entirely off-screen.
    pub fn pixel_bounds(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        // Pixel centers sit at integer + 0.5.
        let half = T::lit(0.5);
        let cmin = (self.mean2d.x - self.radius - half).ceil();
        let cmax = (self.mean2d.x + self.radius - half).floor();
        let rmin = (self.mean2d.y - self.radius - half).ceil();
        let rmax = (self.mean2d.y + self.radius - half).floor();
        let w = T::from_usize_lossy(width);
        let h = T::from_usize_lossy(height);
        if cmax < T::zero() || rmax < T::zero() || cmin >= w || rmin >= h {
            return None;
        }
        let clamp = |v: T, hi: usize| -> usize { v.max(T::zero()).to_usize().unwrap_or(0).min(hi - 1) };
        Some((clamp(cmin, width), clamp(rmin, height), clamp(cmax, width), clamp(rmax, height)))
    }

    /// Squared Mahalanobis distance of an image point from the center.
    #[inline]
    pub fn mahalanobis_sq(&self, px: T, py: T) -> T {
        self.conic.quad_form(Vec2::new(px - self.mean2d.x, py - self.mean2d.y))
    }

    /// Whether the point lies inside the support ellipse.
    #[inline]
    pub fn supports(&self, m2: T) -> bool {
        m2 <= T::lit(SUPPORT_SIGMAS * SUPPORT_SIGMAS)
    }
}

/// Projects one splat for rasterization. `Ok(None)` marks a splat culled by
/// the near plane.
pub fn project_splat<T: Real>(index: usize, splat: &Splat<T>, camera: &Camera<T>) -> Result<Option<ProjectedSplat<T>>> {
    let p = camera.world_to_camera(splat.mean);
    if !(p.z > T::lit(Z_NEAR)) {
        return Ok(None);
    }
    let cov3 = build_covariance(splat.rotation, splat.scales)?;
    let raw = screen_covariance(camera, p, &cov3);
    let dil = T::lit(COV2D_DILATION);
    let cov2d = Sym2::new(raw.a + dil, raw.b, raw.c + dil);
    let conic = cov2d.inverse().ok_or(Error::DegenerateSplat)?;
    let (u, v) = camera.project(p);
    let (lmax, _) = cov2d.eigenvalues();
    let radius = T::lit(SUPPORT_SIGMAS) * lmax.sqrt();

    let r = splat.rotation.to_rotation_matrix();
    let axis = splat.scales.argmin();
    let n_cam = camera.rotation.mul_vec(r.col(axis));
    let sign = if p.dot(n_cam) > T::zero() { -T::one() } else { T::one() };

    Ok(Some(ProjectedSplat {
        index,
        p_cam: p,
        mean2d: Vec2::new(u, v),
        cov2d,
        conic,
        depth: p.z,
        normal: n_cam.scale(sign),
        normal_axis: axis,
        normal_sign: sign,
        radius,
        opacity: splat.opacity,
        color: splat.color,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn covariance_identity_and_diagonal() {
        let c = build_covariance(Quat::<f64>::identity(), Vec3::splat(1.0)).unwrap();
        assert_eq!(c, Mat3::identity());
        let c = build_covariance(Quat::<f64>::identity(), Vec3::new(2.0, 1.0, 1.0)).unwrap();
        assert_eq!(c, Mat3::diag(Vec3::new(4.0, 1.0, 1.0)));
    }

    #[test]
    fn covariance_rotated_about_z() {
        // By hand: R = [[0,-1,0],[1,0,0],[0,0,1]], RS = [[0,-1,0],[2,0,0],[0,0,1]],
        // (RS)(RS)ᵀ = diag(1, 4, 1).
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let c = build_covariance(q, Vec3::new(2.0, 1.0, 1.0)).unwrap();
        let expected = Mat3::diag(Vec3::new(1.0, 4.0, 1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.m[i][j] - expected.m[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_rejects_non_finite() {
        assert!(build_covariance(Quat::<f64>::identity(), Vec3::new(f64::NAN, 1.0, 1.0)).is_err());
        assert!(build_covariance(Quat::new(f64::INFINITY, 0.0, 0.0, 0.0), Vec3::splat(1.0)).is_err());
    }

    #[test]
    fn on_axis_isotropic_projection() {
        // J at (0,0,z) is diag(f/z, f/z) plus a zero third column, so Σ' = (f/z)²σ² I.
        let (f, z, sigma): (f64, f64, f64) = (120.0, 4.0, 0.05);
        let cam = Camera::identity_pose(f, 64, 64);
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, z), sigma, 0.5, Vec3::splat(1.0));
        let cov = project_covariance(&s, &cam).unwrap().unwrap();
        let expected = (f / z).powi(2) * sigma * sigma;
        assert!((cov.a - expected).abs() < 1e-12);
        assert!((cov.c - expected).abs() < 1e-12);
        assert!(cov.b.abs() < 1e-15);
    }

    #[test]
    fn doubling_fx_scales_first_row() {
        let cam = Camera::identity_pose(100.0f64, 64, 64);
        let mut cam2 = cam;
        cam2.fx *= 2.0;
        let s = Splat::new(
            Vec3::new(0.0, 0.0, 3.0),
            Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.3), 0.6),
            Vec3::new(0.2, 0.1, 0.05),
            0.5,
            Vec3::splat(1.0),
        );
        let a = project_covariance(&s, &cam).unwrap().unwrap();
        let b = project_covariance(&s, &cam2).unwrap().unwrap();
        assert!((b.a - 4.0 * a.a).abs() < 1e-9);
        assert!((b.b - 2.0 * a.b).abs() < 1e-9);
        assert!((b.c - a.c).abs() < 1e-12);
    }

    #[test]
    fn behind_near_plane_is_skipped() {
        let cam = Camera::identity_pose(100.0f64, 64, 64);
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, 0.005), 0.1, 0.5, Vec3::splat(1.0));
        assert!(project_covariance(&s, &cam).unwrap().is_none());
        assert!(project_splat(0, &s, &cam).unwrap().is_none());
        let s = Splat::isotropic(Vec3::new(0.0, 0.0, -2.0), 0.1, 0.5, Vec3::splat(1.0));
        assert!(project_covariance(&s, &cam).unwrap().is_none());
    }

    #[test]
    fn gaussian_weight_values() {
        let id = Sym2::new(1.0f64, 0.0, 1.0);
        let m = Vec2::new(5.0, 5.0);
        assert_eq!(gaussian_weight(m, id, m).unwrap(), 1.0);
        let w = gaussian_weight(m, id, Vec2::new(6.0, 5.0)).unwrap();
        assert!((w - 0.606_530_659_712_633_4).abs() < 1e-15);
        let w = gaussian_weight(m, id, Vec2::new(8.0, 8.0)).unwrap();
        assert!((w - 1.234_098_040_866_795_5e-4).abs() < 1e-16);
        assert!(matches!(
            gaussian_weight(m, Sym2::new(1.0, 1.0, 1.0), m),
            Err(Error::DegenerateSplat)
        ));
    }

    #[test]
    fn normal_faces_camera() {
        let cam = Camera::identity_pose(100.0f64, 64, 64);
        // Thin along world z; axis (0,0,1) points away from the camera and must flip.
        let s = Splat::new(
            Vec3::new(0.1, -0.2, 2.0),
            Quat::identity(),
            Vec3::new(0.2, 0.3, 0.01),
            0.5,
            Vec3::splat(1.0),
        );
        let p = project_splat(0, &s, &cam).unwrap().unwrap();
        assert_eq!(p.normal_axis, 2);
        assert!(p.normal.dot(p.p_cam) <= 0.0);
        assert!((p.normal - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }
}
