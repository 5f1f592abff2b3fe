//! Adam over the unconstrained splat parameterization.
//!
//! Raw parameters per splat: mean (3), quaternion (4), log-scales (3),
//! opacity logit (1), color (3).

use serde::{Deserialize, Serialize};

use crate::backward::SplatGrad;
use crate::linalg::{Quat, Vec3};
use crate::scalar::Real;
use crate::splat::{inverse_sigmoid, sigmoid, Splat, SplatSet};

pub const RAW_PARAMS: usize = 14;

const OPACITY_MIN: f64 = 1e-6;
const OPACITY_MAX: f64 = 1.0 - 1e-6;
const SCALE_MIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    /// Mean rate at iteration 0, multiplied by the scene extent.
    pub mean_init: f64,
    /// Mean rate reached at `mean_decay_steps`, multiplied by the scene extent.
    pub mean_final: f64,
    pub mean_decay_steps: usize,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mean_init: 1.6e-4,
            mean_final: 1.6e-6,
            mean_decay_steps: 30_000,
            rotation: 1e-3,
            scale: 5e-3,
            opacity: 5e-2,
            color: 2.5e-3,
        }
    }
}

impl LearningRates {
    /// Log-linear interpolation between the initial and final mean rates.
    pub fn mean_at(&self, iteration: usize) -> f64 {
        if self.mean_decay_steps == 0 {
            return self.mean_final;
        }
        let t = (iteration as f64 / self.mean_decay_steps as f64).clamp(0.0, 1.0);
        (self.mean_init.ln() * (1.0 - t) + self.mean_final.ln() * t).exp()
    }
}

/// Raw parameter vector of a splat.
pub fn to_raw<T: Real>(s: &Splat<T>) -> [T; RAW_PARAMS] {
    let q = s.rotation;
    let o = s.opacity.max(T::lit(OPACITY_MIN)).min(T::lit(OPACITY_MAX));
    [
        s.mean.x,
        s.mean.y,
        s.mean.z,
        q.w,
        q.x,
        q.y,
        q.z,
        s.scales.x.ln(),
        s.scales.y.ln(),
        s.scales.z.ln(),
        inverse_sigmoid(o),
        s.color.x,
        s.color.y,
        s.color.z,
    ]
}

/// Splat from raw parameters, renormalizing the quaternion and clamping
/// opacity and color into their valid ranges.
pub fn from_raw<T: Real>(p: &[T; RAW_PARAMS]) -> Splat<T> {
    let mut q = Quat::new(p[3], p[4], p[5], p[6]);
    q = if q.norm() > T::zero() { q.normalized() } else { Quat::identity() };
    let smin = T::lit(SCALE_MIN);
    Splat::new(
        Vec3::new(p[0], p[1], p[2]),
        q,
        Vec3::new(p[7].exp().max(smin), p[8].exp().max(smin), p[9].exp().max(smin)),
        sigmoid(p[10]).max(T::lit(OPACITY_MIN)).min(T::lit(OPACITY_MAX)),
        Vec3::new(p[11].clamp01(), p[12].clamp01(), p[13].clamp01()),
    )
}

/// Chains a gradient in splat parameters to raw parameters.
pub fn raw_grad<T: Real>(s: &Splat<T>, g: &SplatGrad<T>) -> [T; RAW_PARAMS] {
    let o = s.opacity;
    [
        g.mean.x,
        g.mean.y,
        g.mean.z,
        g.rotation[0],
        g.rotation[1],
        g.rotation[2],
        g.rotation[3],
        g.scales.x * s.scales.x,
        g.scales.y * s.scales.y,
        g.scales.z * s.scales.z,
        g.opacity * o * (T::one() - o),
        g.color.x,
        g.color.y,
        g.color.z,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

/// First and second moments plus a per-splat step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<[f64; RAW_PARAMS]>,
    pub v: Vec<[f64; RAW_PARAMS]>,
    pub steps: Vec<u32>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![[0.0; RAW_PARAMS]; n],
            v: vec![[0.0; RAW_PARAMS]; n],
            steps: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Rebuilds the state after densification: `Some(i)` keeps the moments of
    /// old splat `i`, `None` starts fresh.
    pub fn remap(&self, origin: &[Option<usize>]) -> Self {
        let mut out = Self::new(origin.len());
        for (k, o) in origin.iter().enumerate() {
            if let Some(i) = *o {
                out.m[k] = self.m[i];
                out.v[k] = self.v[i];
                out.steps[k] = self.steps[i];
            }
        }
        out
    }
}

/// Per raw parameter learning rate at `iteration`.
pub fn rates(lr: &LearningRates, extent: f64, iteration: usize) -> [f64; RAW_PARAMS] {
    let mean = lr.mean_at(iteration) * extent;
    [
        mean,
        mean,
        mean,
        lr.rotation,
        lr.rotation,
        lr.rotation,
        lr.rotation,
        lr.scale,
        lr.scale,
        lr.scale,
        lr.opacity,
        lr.color,
        lr.color,
        lr.color,
    ]
}

/// One Adam step on every splat. Splats with an all-zero gradient (not
/// rendered) are left untouched, moments included.
pub fn adam_step<T: Real>(
    splats: &mut SplatSet<T>,
    grads: &[SplatGrad<T>],
    state: &mut AdamState,
    lr: &[f64; RAW_PARAMS],
    cfg: &AdamConfig,
) {
    for (i, s) in splats.splats.iter_mut().enumerate() {
        let g = raw_grad(s, &grads[i]);
        if g.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let mut p = to_raw(s);
        state.steps[i] += 1;
        let t = state.steps[i] as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for k in 0..RAW_PARAMS {
            let gk = g[k].as_f64();
            let m = cfg.beta1 * state.m[i][k] + (1.0 - cfg.beta1) * gk;
            let v = cfg.beta2 * state.v[i][k] + (1.0 - cfg.beta2) * gk * gk;
            state.m[i][k] = m;
            state.v[i][k] = v;
            let step = lr[k] * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
            p[k] -= T::lit(step);
        }
        *s = from_raw(&p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let s = Splat::new(
            Vec3::new(0.1, -0.2, 3.0),
            Quat::new(0.8f64, 0.0, 0.6, 0.0),
            Vec3::new(0.05, 0.2, 0.01),
            0.3,
            Vec3::new(0.1, 0.5, 0.9),
        );
        let back = from_raw(&to_raw(&s));
        assert!((back.opacity - s.opacity).abs() < 1e-12);
        assert!((back.scales - s.scales).norm() < 1e-12);
        assert_eq!(back.mean, s.mean);
    }

    #[test]
    fn mean_rate_decays_log_linearly() {
        let lr = LearningRates {
            mean_decay_steps: 100,
            ..Default::default()
        };
        assert!((lr.mean_at(0) - 1.6e-4).abs() < 1e-18);
        assert!((lr.mean_at(100) - 1.6e-6).abs() < 1e-18);
        assert!((lr.mean_at(50) - 1.6e-5).abs() < 1e-15);
        assert!((lr.mean_at(1000) - 1.6e-6).abs() < 1e-18);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let s = Splat::isotropic(Vec3::zero(), 0.1f64, 0.5, Vec3::splat(0.5));
        let mut set = SplatSet::new(vec![s]);
        let mut g = SplatGrad::zero();
        g.color = Vec3::new(2.0, -3.0, 0.0);
        let mut st = AdamState::new(1);
        let lr = rates(&LearningRates::default(), 1.0, 0);
        adam_step(&mut set, &[g], &mut st, &lr, &AdamConfig::default());
        let c = set.splats[0].color;
        assert!((c.x - (0.5 - 2.5e-3)).abs() < 1e-9);
        assert!((c.y - (0.5 + 2.5e-3)).abs() < 1e-9);
        assert_eq!(c.z, 0.5);
    }
}
