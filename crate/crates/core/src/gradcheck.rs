//! Central finite-difference check of the analytic objective gradient.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optim::objective::{loss_and_grad, loss_value, FrameTargets, LossConfig};
use crate::splat::{Splat, SplatSet};

/// Names of the flattened per-splat parameters, in [`crate::backward::SplatGrad::to_flat`] order.
pub const PARAM_NAMES: [&str; 14] = [
    "mean.x", "mean.y", "mean.z", "rot.w", "rot.x", "rot.y", "rot.z", "scale.x", "scale.y", "scale.z", "opacity",
    "color.r", "color.g", "color.b",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    /// Absolute differences at or below this always pass.
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-3,
            abs_floor: 1e-6,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, analytic: f64, numeric: f64) -> bool {
        let diff = (analytic - numeric).abs();
        diff <= self.abs_floor || diff <= self.rel * analytic.abs().max(numeric.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub splat: usize,
    pub param: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates whose probe changed which splats touch which pixels; the
    /// objective is not smooth across that and they are not compared.
    pub skipped: usize,
    /// Coordinates whose difference quotient changed under step halving (a
    /// kink such as an L1 sign flip inside the probe interval) and were
    /// compared at the finer step instead.
    pub refined: usize,
    /// Over coordinates whose difference exceeds the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub mismatches: Vec<Mismatch>,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.checked > 0
    }

    pub fn merge(&mut self, o: GradCheck) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        self.refined += o.refined;
        self.max_rel_err = self.max_rel_err.max(o.max_rel_err);
        self.max_abs_err = self.max_abs_err.max(o.max_abs_err);
        self.mismatches.extend(o.mismatches);
    }
}

/// Sets raw parameter `k` of `s`. The rasterizer sees a rotation through
/// `q / |q|`, so a perturbed quaternion is renormalized; the objective value
/// is unchanged by that and the probe stays valid for coarse steps.
fn set_param(s: &mut Splat<f64>, base: &Splat<f64>, k: usize, v: f64) {
    match k {
        0..=2 => s.mean[k] = v,
        3..=6 => {
            let mut q = base.rotation;
            match k {
                3 => q.w = v,
                4 => q.x = v,
                5 => q.y = v,
                _ => q.z = v,
            }
            s.rotation = q.normalized();
        }
        7..=9 => s.scales[k - 7] = v,
        10 => s.opacity = v,
        _ => s.color[k - 11] = v,
    }
}

fn get_param(s: &Splat<f64>, k: usize) -> f64 {
    match k {
        0..=2 => s.mean[k],
        3 => s.rotation.w,
        4 => s.rotation.x,
        5 => s.rotation.y,
        6 => s.rotation.z,
        7..=9 => s.scales[k - 7],
        10 => s.opacity,
        _ => s.color[k - 11],
    }
}

/// Step halvings tried when a coordinate disagrees at the requested step.
const MAX_REFINEMENTS: usize = 6;

/// Central difference of parameter `k` of splat `i`, or `None` when either
/// probe changes the support signature.
fn central(
    probe: &mut SplatSet<f64>,
    orig: &Splat<f64>,
    i: usize,
    k: usize,
    h: f64,
    targets: &FrameTargets<'_, f64>,
    cfg: &LossConfig,
    signature: u64,
) -> Result<Option<f64>> {
    let x = get_param(orig, k);
    set_param(&mut probe.splats[i], orig, k, x + h);
    let (fp, sp) = loss_value(probe, targets, cfg)?;
    set_param(&mut probe.splats[i], orig, k, x - h);
    let (fm, sm) = loss_value(probe, targets, cfg)?;
    probe.splats[i] = *orig;
    Ok((sp == signature && sm == signature).then(|| (fp - fm) / (2.0 * h)))
}

/// Compares the analytic gradient of the configured objective with central
/// differences of step `h` on every parameter of every splat.
pub fn check_gradients(
    splats: &SplatSet<f64>,
    targets: &FrameTargets<'_, f64>,
    cfg: &LossConfig,
    h: f64,
    tol: &Tolerance,
) -> Result<GradCheck> {
    let base = loss_and_grad(splats, targets, cfg)?;
    let analytic: Vec<[f64; 14]> = base.grads.iter().map(|g| g.to_flat()).collect();
    compare(splats, &analytic, base.state.signature(), targets, cfg, h, tol)
}

fn compare(
    splats: &SplatSet<f64>,
    analytic: &[[f64; 14]],
    signature: u64,
    targets: &FrameTargets<'_, f64>,
    cfg: &LossConfig,
    h: f64,
    tol: &Tolerance,
) -> Result<GradCheck> {
    let mut out = GradCheck::default();
    let mut probe = splats.clone();
    for i in 0..splats.len() {
        for (k, &a) in analytic[i].iter().enumerate() {
            let orig = splats.splats[i];
            let Some(mut n) = central(&mut probe, &orig, i, k, h, targets, cfg, signature)? else {
                out.skipped += 1;
                continue;
            };
            if !tol.accepts(a, n) {
                // Halve the step until two successive quotients agree to a
                // tenth of the tolerance. A gradient error survives this; a
                // kink inside the probe interval (an L1 sign flip, say)
                // does not.
                let settle = Tolerance {
                    rel: 0.1 * tol.rel,
                    abs_floor: 0.1 * tol.abs_floor,
                };
                let mut step = h;
                let mut prev = n;
                for _ in 0..MAX_REFINEMENTS {
                    step *= 0.5;
                    let Some(fine) = central(&mut probe, &orig, i, k, step, targets, cfg, signature)? else {
                        break;
                    };
                    if settle.accepts(prev, fine) {
                        if step < 0.5 * h {
                            out.refined += 1;
                            n = fine;
                        }
                        break;
                    }
                    prev = fine;
                }
            }
            out.checked += 1;
            let diff = (a - n).abs();
            out.max_abs_err = out.max_abs_err.max(diff);
            if diff > tol.abs_floor {
                out.max_rel_err = out.max_rel_err.max(diff / a.abs().max(n.abs()));
            }
            if !tol.accepts(a, n) {
                out.mismatches.push(Mismatch {
                    splat: i,
                    param: k,
                    analytic: a,
                    numeric: n,
                });
            }
        }
    }
    Ok(out)
}
