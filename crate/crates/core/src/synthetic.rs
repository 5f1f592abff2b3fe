//! Synthetic scenes and datasets rendered from known splats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::camera::Camera;
use crate::dataset::{Frame, FrameDataset};
use crate::error::Result;
use crate::linalg::{Quat, Vec3};
use crate::raster::rasterize;
use crate::scalar::Real;
use crate::splat::{inverse_sigmoid, sigmoid, Splat, SplatSet};

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_quat<T: Real, R: Rng>(rng: &mut R) -> Quat<T> {
    let q = Quat::new(
        T::lit(normal(rng)),
        T::lit(normal(rng)),
        T::lit(normal(rng)),
        T::lit(normal(rng)),
    );
    if q.norm() > T::lit(1e-9) {
        q.normalized()
    } else {
        Quat::identity()
    }
}

/// `n` anisotropic splats inside the cube of half-width `half` at the origin.
pub fn random_splats<T: Real>(n: usize, half: f64, scale_range: (f64, f64), seed: u64) -> SplatSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mean = Vec3::new(
                T::lit(uniform(&mut rng, -half, half)),
                T::lit(uniform(&mut rng, -half, half)),
                T::lit(uniform(&mut rng, -half, half)),
            );
            let scales = Vec3::new(
                T::lit(uniform(&mut rng, scale_range.0, scale_range.1)),
                T::lit(uniform(&mut rng, scale_range.0, scale_range.1)),
                T::lit(uniform(&mut rng, scale_range.0, scale_range.1)),
            );
            let color = Vec3::new(
                T::lit(uniform(&mut rng, 0.05, 0.95)),
                T::lit(uniform(&mut rng, 0.05, 0.95)),
                T::lit(uniform(&mut rng, 0.05, 0.95)),
            );
            Splat::new(
                mean,
                random_quat(&mut rng),
                scales,
                T::lit(uniform(&mut rng, 0.5, 0.95)),
                color,
            )
        })
        .collect()
}

/// Cameras on a ring around `target`, alternating between two elevations.
pub fn orbit_cameras<T: Real>(
    n: usize,
    radius: f64,
    elevation: f64,
    target: Vec3<T>,
    focal: f64,
    width: usize,
    height: usize,
) -> Vec<Camera<T>> {
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            let z = if i % 2 == 0 { elevation } else { -0.5 * elevation };
            let eye = target
                + Vec3::new(
                    T::lit(radius * theta.cos()),
                    T::lit(radius * theta.sin()),
                    T::lit(z),
                );
            Camera::look_at(T::lit(focal), width, height, eye, target, Vec3::new(T::zero(), T::zero(), T::one()))
        })
        .collect()
}

/// Renders color and depth of `splats` from every camera; the rendered depth
/// stands in for the predicted depth.
pub fn render_frames<T: Real>(splats: &SplatSet<T>, cameras: &[Camera<T>]) -> Result<Vec<Frame<T>>> {
    cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let r = rasterize(splats, cam, None)?;
            Ok(Frame {
                name: format!("frame_{i:04}.png"),
                camera: *cam,
                image: r.color,
                depth: r.depth,
                mask: None,
            })
        })
        .collect()
}

/// Magnitudes of [`perturb_splats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub mean: f64,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity_logit: f64,
    pub color: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            mean: 0.05,
            log_scale: 0.3,
            rotation: 0.2,
            opacity_logit: 0.5,
            color: 0.15,
        }
    }
}

/// Gaussian noise on every parameter, keeping each splat valid.
pub fn perturb_splats<T: Real>(splats: &SplatSet<T>, p: &Perturbation, seed: u64) -> SplatSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    splats
        .iter()
        .map(|s| {
            let mut o = *s;
            for k in 0..3 {
                o.mean[k] += T::lit(p.mean * normal(&mut rng));
                o.scales[k] = o.scales[k] * T::lit((p.log_scale * normal(&mut rng)).exp());
                o.color[k] = (o.color[k] + T::lit(p.color * normal(&mut rng))).clamp01();
            }
            let axis = Vec3::new(
                T::lit(normal(&mut rng)),
                T::lit(normal(&mut rng)),
                T::lit(normal(&mut rng)),
            )
            .normalized();
            let dq = Quat::from_axis_angle(axis, T::lit(p.rotation * normal(&mut rng)));
            o.rotation = dq.mul(o.rotation).normalized();
            let logit = inverse_sigmoid(o.opacity) + T::lit(p.opacity_logit * normal(&mut rng));
            o.opacity = sigmoid(logit).max(T::lit(1e-4)).min(T::lit(1.0 - 1e-4));
            o
        })
        .collect()
}

/// The known scene, its dataset and a perturbed initialization for the
/// self-reconstruction experiment.
pub struct SelfReconstruction<T> {
    pub truth: SplatSet<T>,
    pub init: SplatSet<T>,
    pub dataset: FrameDataset<T>,
}

pub fn self_reconstruction_scene<T: Real>(
    n_splats: usize,
    n_views: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<SelfReconstruction<T>> {
    let truth = random_splats(n_splats, 0.8, (0.06, 0.22), seed);
    let cams = orbit_cameras(n_views, 4.0, 1.5, Vec3::zero(), 1.1 * width as f64, width, height);
    let dataset = FrameDataset::new(render_frames(&truth, &cams)?);
    let init = perturb_splats(&truth, &Perturbation::default(), seed ^ 0x5eed);
    Ok(SelfReconstruction { truth, init, dataset })
}

/// Procedural color of the textured plane at plane coordinates `(u, v)`.
pub fn plane_texture(u: f64, v: f64) -> [f64; 3] {
    let a = (3.0 * u).sin() * (2.0 * v).cos();
    let b = ((5.0 * u + 1.0).cos() + (4.0 * v).sin()) * 0.5;
    [0.5 + 0.35 * a, 0.5 + 0.35 * b, 0.5 - 0.25 * a * b]
}

/// Ground-truth plane `z = 0` tiled by thin splats on a `grid × grid`
/// lattice over `[-half, half]²`, colored by [`plane_texture`].
pub fn textured_plane<T: Real>(grid: usize, half: f64) -> SplatSet<T> {
    let step = 2.0 * half / grid as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let u = -half + (i as f64 + 0.5) * step;
            let v = -half + (j as f64 + 0.5) * step;
            let c = plane_texture(u, v);
            out.push(Splat::new(
                Vec3::new(T::lit(u), T::lit(v), T::zero()),
                Quat::identity(),
                Vec3::new(T::lit(0.6 * step), T::lit(0.6 * step), T::lit(0.002)),
                T::lit(0.95),
                Vec3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])),
            ));
        }
    }
    SplatSet::new(out)
}

/// Cameras looking down at the plane from a ring above it.
pub fn plane_cameras<T: Real>(n: usize, focal: f64, width: usize, height: usize) -> Vec<Camera<T>> {
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            let r = 1.0 + 0.3 * (i % 3) as f64;
            let eye = Vec3::new(T::lit(r * theta.cos()), T::lit(r * theta.sin()), T::lit(2.0));
            let target = Vec3::new(T::lit(0.2 * theta.sin()), T::lit(0.2 * theta.cos()), T::zero());
            Camera::look_at(T::lit(focal), width, height, eye, target, Vec3::new(T::zero(), T::zero(), T::one()))
        })
        .collect()
}

/// Isotropic, randomly placed splats near the plane: the starting point for
/// the geometry-loss comparison.
pub fn plane_init<T: Real>(n: usize, half: f64, seed: u64) -> SplatSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = uniform(&mut rng, -half, half);
            let v = uniform(&mut rng, -half, half);
            let z = 0.02 * normal(&mut rng);
            let c = plane_texture(u, v);
            let sigma = T::lit(uniform(&mut rng, 0.04, 0.07));
            Splat::new(
                Vec3::new(T::lit(u), T::lit(v), T::lit(z)),
                random_quat(&mut rng),
                Vec3::new(sigma, sigma * T::lit(0.9), sigma * T::lit(0.8)),
                T::lit(0.7),
                Vec3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])),
            )
        })
        .collect()
}

/// Mean angle (degrees) between rendered normals and `truth` (camera
/// frame) over pixels with alpha above 0.5. `None` when no pixel qualifies.
pub fn mean_normal_error_deg<T: Real>(splats: &SplatSet<T>, camera: &Camera<T>, world_normal: Vec3<T>) -> Result<Option<f64>> {
    let r = rasterize(splats, camera, None)?;
    let n_cam = camera.rotation.mul_vec(world_normal).normalized();
    let mut sum = 0.0;
    let mut count = 0usize;
    for pix in 0..r.alpha.data.len() {
        if r.alpha.data[pix] <= T::lit(0.5) {
            continue;
        }
        let n = Vec3::new(r.normal.data[pix * 3], r.normal.data[pix * 3 + 1], r.normal.data[pix * 3 + 2]);
        if n.norm() == T::zero() {
            continue;
        }
        let c = n.normalized().dot(n_cam).abs().as_f64().min(1.0);
        sum += c.acos().to_degrees();
        count += 1;
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// A small random scene with smooth supervision, sized for finite-difference
/// gradient checks.
#[derive(Debug, Clone)]
pub struct CheckScene<T> {
    pub splats: SplatSet<T>,
    pub camera: Camera<T>,
    pub image: crate::image::Image<T>,
    pub depth: crate::image::Image<T>,
    pub pseudo: crate::losses::PseudoNormals<T>,
}

pub fn check_scene<T: Real>(n: usize, size: usize, seed: u64) -> CheckScene<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let focal = 1.2 * size as f64;
    let camera = Camera::identity_pose(T::lit(focal), size, size);
    let splats = (0..n)
        .map(|_| {
            let z = uniform(&mut rng, 2.5, 4.0);
            let mean = Vec3::new(
                T::lit(uniform(&mut rng, -0.3, 0.3) * z),
                T::lit(uniform(&mut rng, -0.3, 0.3) * z),
                T::lit(z),
            );
            let scales = Vec3::new(
                T::lit(uniform(&mut rng, 0.08, 0.3)),
                T::lit(uniform(&mut rng, 0.08, 0.3)),
                T::lit(uniform(&mut rng, 0.02, 0.3)),
            );
            let color = Vec3::new(
                T::lit(uniform(&mut rng, 0.05, 0.95)),
                T::lit(uniform(&mut rng, 0.05, 0.95)),
                T::lit(uniform(&mut rng, 0.05, 0.95)),
            );
            Splat::new(mean, random_quat(&mut rng), scales, T::lit(uniform(&mut rng, 0.3, 0.9)), color)
        })
        .collect();
    let phase: [f64; 4] = std::array::from_fn(|_| uniform(&mut rng, 0.0, std::f64::consts::TAU));
    let mut image = crate::image::Image::new(size, size, 3);
    let mut depth = crate::image::Image::new(size, size, 1);
    for r in 0..size {
        for c in 0..size {
            let (u, v) = (c as f64 / size as f64, r as f64 / size as f64);
            for ch in 0..3 {
                let val = 0.5 + 0.3 * (4.0 * u + phase[ch] + ch as f64 * v).sin() * (3.0 * v + phase[3]).cos();
                image.set(r, c, ch, T::lit(val));
            }
            depth.set(r, c, 0, T::lit(3.0 + 0.5 * u - 0.3 * v + 0.2 * (5.0 * u + phase[0]).sin() * (4.0 * v).cos()));
        }
    }
    let pseudo = crate::losses::pseudo_normals_from_depth(&depth, &camera, crate::losses::DEFAULT_PCA_RADIUS);
    CheckScene {
        splats,
        camera,
        image,
        depth,
        pseudo,
    }
}

/// Flat splats tiling the five exposed faces of the box `[lo, hi]` standing
/// on `z = lo.z`, spaced about `step` apart.
pub fn box_splats<T: Real>(lo: [f64; 3], hi: [f64; 3], step: f64, color: [f64; 3]) -> SplatSet<T> {
    use std::f64::consts::FRAC_PI_2;
    let mut out = Vec::new();
    let mut face = |origin: [f64; 3], u: [f64; 3], v: [f64; 3], rot: Quat<f64>| {
        let lu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let lv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (nu, nv) = ((lu / step).ceil().max(1.0) as usize, (lv / step).ceil().max(1.0) as usize);
        for i in 0..nu {
            for j in 0..nv {
                let (a, b) = ((i as f64 + 0.5) / nu as f64, (j as f64 + 0.5) / nv as f64);
                let p: [f64; 3] = std::array::from_fn(|k| origin[k] + a * u[k] + b * v[k]);
                let shade = 0.85 + 0.15 * ((7.0 * a).sin() * (5.0 * b).cos());
                out.push(Splat::new(
                    Vec3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2])),
                    rot.cast(),
                    Vec3::new(T::lit(0.6 * lu / nu as f64), T::lit(0.6 * lv / nv as f64), T::lit(0.002)),
                    T::lit(0.95),
                    Vec3::new(T::lit(color[0] * shade), T::lit(color[1] * shade), T::lit(color[2] * shade)),
                ));
            }
        }
    };
    let (dx, dy, dz) = (hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    // Local axes (u, v, n) map to the face's (first edge, second edge, normal).
    face([lo[0], lo[1], hi[2]], [dx, 0.0, 0.0], [0.0, dy, 0.0], Quat::identity());
    let about_y = Quat::from_axis_angle(y, FRAC_PI_2);
    let about_x = Quat::from_axis_angle(x, FRAC_PI_2);
    face([lo[0], lo[1], lo[2]], [0.0, 0.0, dz], [0.0, dy, 0.0], about_y);
    face([hi[0], lo[1], lo[2]], [0.0, 0.0, dz], [0.0, dy, 0.0], about_y);
    face([lo[0], lo[1], lo[2]], [dx, 0.0, 0.0], [0.0, 0.0, dz], about_x);
    face([lo[0], hi[1], lo[2]], [dx, 0.0, 0.0], [0.0, 0.0, dz], about_x);
    SplatSet::new(out)
}

/// Box standing on the textured plane, with the views used to fuse it.
pub struct PlaneBox<T> {
    pub splats: SplatSet<T>,
    pub cameras: Vec<Camera<T>>,
    pub box_lo: [f64; 3],
    pub box_hi: [f64; 3],
}

pub fn plane_box_scene<T: Real>(n_views: usize, width: usize, height: usize) -> PlaneBox<T> {
    let (box_lo, box_hi) = ([-0.3, -0.3, 0.0], [0.3, 0.3, 0.8]);
    let mut splats = textured_plane::<T>(60, 2.0);
    splats.splats.extend(box_splats::<T>(box_lo, box_hi, 0.05, [0.8, 0.3, 0.2]).splats);
    let focal = 110.0 * width as f64 / 128.0;
    let cameras = (0..n_views)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / n_views as f64;
            let h = if i % 2 == 0 { 1.6 } else { 2.4 };
            Camera::look_at(
                T::lit(focal),
                width,
                height,
                Vec3::new(T::lit(2.5 * th.cos()), T::lit(2.5 * th.sin()), T::lit(h)),
                Vec3::new(T::zero(), T::zero(), T::lit(0.2)),
                Vec3::new(T::zero(), T::zero(), T::one()),
            )
        })
        .collect();
    PlaneBox {
        splats,
        cameras,
        box_lo,
        box_hi,
    }
}
