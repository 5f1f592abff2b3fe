//! Analytic reverse pass through the rasterizer.
//!
//! Given the gradient of a scalar loss with respect to the rendered color,
//! depth and normal maps, produces the gradient with respect to every splat
//! parameter. Per-pixel work mirrors the forward compositing loop in reverse;
//! per-splat work chains through inverse, projection, covariance and
//! quaternion.

use rayon::prelude::*;

use crate::camera::Camera;
use crate::image::Image;
use crate::linalg::{quat_matrix_backward, Mat3, Quat, Vec2, Vec3};
use crate::raster::{pixel_center, RenderState, TILE_SIZE};
use crate::scalar::Real;
use crate::splat::SplatSet;

/// Gradient of a loss with respect to the rendered maps. Missing maps
/// contribute nothing.
#[derive(Debug, Clone, Default)]
pub struct ImageGrads<T> {
    pub color: Option<Image<T>>,
    pub depth: Option<Image<T>>,
    pub normal: Option<Image<T>>,
}

/// Gradient for one splat, in the same parameterization as [`crate::splat::Splat`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplatGrad<T> {
    pub mean: Vec3<T>,
    /// With respect to the raw quaternion components `(w, x, y, z)`.
    pub rotation: [T; 4],
    pub scales: Vec3<T>,
    pub opacity: T,
    pub color: Vec3<T>,
    /// Sum over pixels of the absolute screen-space positional gradient;
    /// drives densification.
    pub mean2d_abs: Vec2<T>,
}

impl<T: Real> SplatGrad<T> {
    pub fn zero() -> Self {
        Self {
            mean: Vec3::zero(),
            rotation: [T::zero(); 4],
            scales: Vec3::zero(),
            opacity: T::zero(),
            color: Vec3::zero(),
            mean2d_abs: Vec2::zero(),
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.mean += o.mean;
        for k in 0..4 {
            self.rotation[k] += o.rotation[k];
        }
        self.scales += o.scales;
        self.opacity += o.opacity;
        self.color += o.color;
        self.mean2d_abs += o.mean2d_abs;
    }

    /// Flattened as mean(3), rotation(4), scales(3), opacity(1), color(3).
    pub fn to_flat(&self) -> [T; 14] {
        [
            self.mean.x,
            self.mean.y,
            self.mean.z,
            self.rotation[0],
            self.rotation[1],
            self.rotation[2],
            self.rotation[3],
            self.scales.x,
            self.scales.y,
            self.scales.z,
            self.opacity,
            self.color.x,
            self.color.y,
            self.color.z,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Screen-space gradient accumulator for one projected splat.
#[derive(Debug, Clone, Copy, Default)]
struct Grad2d<T> {
    mean2d: Vec2<T>,
    mean2d_abs: Vec2<T>,
    /// Conic entries (a, b, c) of `[[a, b], [b, c]]`, `b` counted once.
    conic: Vec3<T>,
    opacity: T,
    color: Vec3<T>,
    depth: T,
    normal: Vec3<T>,
}

impl<T: Real> Grad2d<T> {
    fn zero() -> Self {
        Self {
            mean2d: Vec2::zero(),
            mean2d_abs: Vec2::zero(),
            conic: Vec3::zero(),
            opacity: T::zero(),
            color: Vec3::zero(),
            depth: T::zero(),
            normal: Vec3::zero(),
        }
    }

    fn add_assign(&mut self, o: &Self) {
        self.mean2d += o.mean2d;
        self.mean2d_abs += o.mean2d_abs;
        self.conic += o.conic;
        self.opacity += o.opacity;
        self.color += o.color;
        self.depth += o.depth;
        self.normal += o.normal;
    }
}

fn read3<T: Real>(img: &Option<Image<T>>, pix: usize) -> Vec3<T> {
    match img {
        Some(im) => Vec3::new(im.data[pix * 3], im.data[pix * 3 + 1], im.data[pix * 3 + 2]),
        None => Vec3::zero(),
    }
}

/// Back-propagates image-space gradients to splat parameters.
pub fn backward<T: Real>(
    splats: &SplatSet<T>,
    camera: &Camera<T>,
    state: &RenderState<T>,
    grads: &ImageGrads<T>,
) -> Vec<SplatGrad<T>> {
    let (w, h) = (state.width, state.height);
    let bins = &state.bins;
    let projected = &state.projected;
    let half = T::lit(0.5);

    // Per tile: local accumulators indexed by position in the tile list.
    let per_tile: Vec<Vec<Grad2d<T>>> = (0..bins.lists.len())
        .into_par_iter()
        .map(|t| {
            let (tx, ty) = (t % bins.tiles_x, t / bins.tiles_x);
            let list = &bins.lists[t];
            let mut acc = vec![Grad2d::zero(); list.len()];
            if list.is_empty() {
                return acc;
            }
            for row in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(h) {
                for col in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(w) {
                    let pix = row * w + col;
                    let g_color = read3(&grads.color, pix);
                    let g_normal = read3(&grads.normal, pix);
                    let g_depth = grads.depth.as_ref().map_or(T::zero(), |d| d.data[pix]);
                    let (px, py) = pixel_center::<T>(row, col);

                    let mut trans = state.final_transmittance[pix];
                    let mut behind_color = Vec3::zero();
                    let mut behind_depth = T::zero();
                    let mut behind_normal = Vec3::zero();
                    for k in (0..state.n_contrib[pix] as usize).rev() {
                        let p = &projected[list[k] as usize];
                        let dx = px - p.mean2d.x;
                        let dy = py - p.mean2d.y;
                        let m2 = p.conic.quad_form(Vec2::new(dx, dy));
                        if !p.supports(m2) {
                            continue;
                        }
                        let gauss = (-half * m2).exp();
                        let alpha = p.opacity * gauss;
                        let one_minus = T::one() - alpha;
                        trans = trans / one_minus;
                        let weight = trans * alpha;

                        let a = &mut acc[k];
                        a.color += g_color.scale(weight);
                        a.depth += g_depth * weight;
                        a.normal += g_normal.scale(weight);

                        let d_alpha = g_color.dot(p.color.scale(trans) - behind_color.scale(T::one() / one_minus))
                            + g_depth * (p.depth * trans - behind_depth / one_minus)
                            + g_normal.dot(p.normal.scale(trans) - behind_normal.scale(T::one() / one_minus));

                        behind_color += p.color.scale(weight);
                        behind_depth += p.depth * weight;
                        behind_normal += p.normal.scale(weight);

                        a.opacity += d_alpha * gauss;
                        let d_m2 = -half * d_alpha * p.opacity * gauss;
                        let two = T::lit(2.0);
                        let gu = -d_m2 * two * (p.conic.a * dx + p.conic.b * dy);
                        let gv = -d_m2 * two * (p.conic.b * dx + p.conic.c * dy);
                        a.mean2d += Vec2::new(gu, gv);
                        a.mean2d_abs += Vec2::new(gu.abs(), gv.abs());
                        a.conic += Vec3::new(d_m2 * dx * dx, d_m2 * two * dx * dy, d_m2 * dy * dy);
                    }
                }
            }
            acc
        })
        .collect();

    // Deterministic reduction in tile order.
    let mut screen = vec![Grad2d::zero(); projected.len()];
    for (t, acc) in per_tile.iter().enumerate() {
        for (k, g) in acc.iter().enumerate() {
            screen[bins.lists[t][k] as usize].add_assign(g);
        }
    }

    let mut out = vec![SplatGrad::zero(); splats.len()];
    let chained: Vec<(usize, SplatGrad<T>)> = projected
        .par_iter()
        .zip(screen.par_iter())
        .map(|(p, g)| (p.index, chain_to_params(&splats.splats[p.index], camera, p, g)))
        .collect();
    for (i, g) in chained {
        out[i] = g;
    }
    out
}

fn chain_to_params<T: Real>(
    splat: &crate::splat::Splat<T>,
    camera: &Camera<T>,
    p: &crate::projection::ProjectedSplat<T>,
    g: &Grad2d<T>,
) -> SplatGrad<T> {
    let two = T::lit(2.0);
    let q = p.conic;
    // Full symmetric gradient on the conic matrix; the off-diagonal parameter
    // appears in two entries.
    let gq = [[g.conic.x, g.conic.y * T::lit(0.5)], [g.conic.y * T::lit(0.5), g.conic.z]];
    let qm = [[q.a, q.b], [q.b, q.c]];
    // dL/dΣ' = -Q·G·Q
    let mut qg = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            qg[i][j] = qm[i][0] * gq[0][j] + qm[i][1] * gq[1][j];
        }
    }
    let mut gs2 = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            gs2[i][j] = -(qg[i][0] * qm[0][j] + qg[i][1] * qm[1][j]);
        }
    }

    let pc = p.p_cam;
    let (fx, fy) = (camera.fx, camera.fy);
    let iz = T::one() / pc.z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let jac = crate::projection::perspective_jacobian(camera, pc);
    let wt = camera.rotation.transpose();
    let t_rows = [wt.mul_vec(jac[0]), wt.mul_vec(jac[1])];

    let r = splat.rotation.to_rotation_matrix();
    let s = splat.scales;
    let m = Mat3::from_cols(r.col(0).scale(s.x), r.col(1).scale(s.y), r.col(2).scale(s.z));
    let cov3 = m.mul_mat(&m.transpose());

    // dL/dΣ = Tᵀ·G'·T, dL/dT = 2·G'·T·Σ
    let mut g_cov3 = Mat3::zero();
    for a in 0..3 {
        for b in 0..3 {
            let mut v = T::zero();
            for i in 0..2 {
                for j in 0..2 {
                    v += t_rows[i][a] * gs2[i][j] * t_rows[j][b];
                }
            }
            g_cov3.m[a][b] = v;
        }
    }
    let t_sigma = [cov3.mul_vec(t_rows[0]), cov3.mul_vec(t_rows[1])];
    let mut g_t = [Vec3::zero(); 2];
    for i in 0..2 {
        g_t[i] = (t_sigma[0].scale(gs2[i][0]) + t_sigma[1].scale(gs2[i][1])).scale(two);
    }
    // T = J·W ⇒ dL/dJ = dL/dT·Wᵀ; rows of J map through W.
    let g_j = [camera.rotation.mul_vec(g_t[0]), camera.rotation.mul_vec(g_t[1])];

    let mut g_p = Vec3::zero();
    // J00 = fx/z, J02 = -fx·x/z², J11 = fy/z, J12 = -fy·y/z²
    g_p.x += g_j[0].z * (-fx * iz2);
    g_p.y += g_j[1].z * (-fy * iz2);
    g_p.z += g_j[0].x * (-fx * iz2) + g_j[0].z * (two * fx * pc.x * iz3) + g_j[1].y * (-fy * iz2)
        + g_j[1].z * (two * fy * pc.y * iz3);
    // u = fx·x/z + cx, v = fy·y/z + cy
    g_p.x += g.mean2d.x * fx * iz;
    g_p.y += g.mean2d.y * fy * iz;
    g_p.z += -g.mean2d.x * fx * pc.x * iz2 - g.mean2d.y * fy * pc.y * iz2;
    g_p.z += g.depth;

    let g_mean = wt.mul_vec(g_p);

    // Σ = M·Mᵀ ⇒ dL/dM = 2·G_Σ·M (G_Σ symmetric)
    let g_m = g_cov3.mul_mat(&m).scale(two);
    let mut g_r = Mat3::zero();
    let mut g_s = Vec3::zero();
    for k in 0..3 {
        for row in 0..3 {
            g_s[k] += g_m.m[row][k] * r.m[row][k];
            g_r.m[row][k] += g_m.m[row][k] * s[k];
        }
    }
    // n = sign·W·R[:, axis]
    let g_axis = wt.mul_vec(g.normal).scale(p.normal_sign);
    for row in 0..3 {
        g_r.m[row][p.normal_axis] += g_axis[row];
    }
    let g_q: Quat<T> = quat_matrix_backward(splat.rotation, &g_r);

    SplatGrad {
        mean: g_mean,
        rotation: g_q.to_array(),
        scales: g_s,
        opacity: g.opacity,
        color: g.color,
        mean2d_abs: g.mean2d_abs,
    }
}
