//! Total training objective and its gradient with respect to splat parameters.

use serde::{Deserialize, Serialize};

use crate::backward::{backward, ImageGrads, SplatGrad};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::losses::{
    geo_consistency_loss, ncc_depth_loss, normal_loss, rgb_loss, scale_loss, LossBreakdown, LossEval, LossWeights,
    PatchGrid, PseudoNormals, DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE,
};
use crate::raster::{rasterize_with_state, RenderOutput, RenderState};
use crate::scalar::Real;
use crate::splat::SplatSet;

/// Which terms are active and how they are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub rgb: bool,
    pub depth: bool,
    pub normal: bool,
    pub geo: bool,
    pub scale: bool,
    /// Treat a term with no usable pixels as zero instead of failing.
    pub skip_empty: bool,
    pub patch_size: usize,
    pub patch_stride: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            rgb: true,
            depth: true,
            normal: true,
            geo: true,
            scale: true,
            skip_empty: true,
            patch_size: DEFAULT_PATCH_SIZE,
            patch_stride: DEFAULT_PATCH_STRIDE,
        }
    }
}

impl LossConfig {
    pub fn rgb_only() -> Self {
        Self {
            depth: false,
            normal: false,
            geo: false,
            scale: false,
            ..Self::default()
        }
    }

    /// Only the photometric term is kept when `geometry` is false.
    pub fn with_geometry(mut self, geometry: bool) -> Self {
        if !geometry {
            self.depth = false;
            self.normal = false;
            self.geo = false;
            self.scale = false;
        }
        self
    }

    fn needs_geometry_inputs(&self) -> bool {
        self.depth || self.normal || self.geo
    }
}

/// Supervision for one view.
#[derive(Debug, Clone, Copy)]
pub struct FrameTargets<'a, T> {
    pub camera: &'a Camera<T>,
    pub image: &'a Image<T>,
    pub depth: Option<&'a Image<T>>,
    pub pseudo_normals: Option<&'a PseudoNormals<T>>,
    pub mask: Option<&'a Mask>,
}

/// Result of one forward/backward evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub total: f64,
    pub breakdown: LossBreakdown,
    pub grads: Vec<SplatGrad<T>>,
    pub render: RenderOutput<T>,
    pub state: RenderState<T>,
    /// Terms that had no usable support and were counted as zero.
    pub empty_terms: Vec<&'static str>,
}

fn add_scaled<T: Real>(dst: &mut Option<Image<T>>, g: &Image<T>, w: T) {
    match dst {
        Some(d) => {
            for (a, b) in d.data.iter_mut().zip(&g.data) {
                *a += w * *b;
            }
        }
        None => *dst = Some(g.map(|v| v * w)),
    }
}

fn soft<T: Real>(
    r: Result<LossEval<T>>,
    name: &'static str,
    skip_empty: bool,
    empty: &mut Vec<&'static str>,
) -> Result<Option<LossEval<T>>> {
    match r {
        Ok(e) if e.empty_support => {
            empty.push(name);
            Ok(None)
        }
        Ok(e) => Ok(Some(e)),
        Err(Error::EmptySupport(_)) if skip_empty => {
            empty.push(name);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Renders `splats` from the target view and returns the weighted objective
/// with its analytic gradient.
pub fn loss_and_grad<T: Real>(splats: &SplatSet<T>, targets: &FrameTargets<'_, T>, cfg: &LossConfig) -> Result<Evaluation<T>> {
    let (render, state) = rasterize_with_state(splats, targets.camera, None)?;
    let w = &cfg.weights;
    let mut breakdown = LossBreakdown::default();
    let mut grads = ImageGrads::default();
    let mut empty = Vec::new();

    if cfg.rgb {
        if let Some(e) = soft(rgb_loss(&render.color, targets.image, targets.mask), "rgb", true, &mut empty)? {
            breakdown.rgb = e.value.as_f64();
            add_scaled(&mut grads.color, &e.grad, T::one());
        }
    }
    if cfg.needs_geometry_inputs() && targets.depth.is_none() {
        return Err(Error::InvalidParameter("geometry losses need a predicted depth map".into()));
    }
    if cfg.depth {
        let depth = targets.depth.expect("checked above");
        let grid = PatchGrid::new(cfg.patch_size, cfg.patch_stride, render.depth.width, render.depth.height)?;
        let r = ncc_depth_loss(&render.depth, depth, &grid, targets.mask);
        if let Some(e) = soft(r, "depth", cfg.skip_empty, &mut empty)? {
            breakdown.depth = e.value.as_f64();
            add_scaled(&mut grads.depth, &e.grad, T::lit(w.depth));
        }
    }
    if cfg.normal {
        let pseudo = targets
            .pseudo_normals
            .ok_or_else(|| Error::InvalidParameter("normal loss needs pseudo normals".into()))?;
        if let Some(e) = soft(normal_loss(&render.normal, pseudo), "normal", cfg.skip_empty, &mut empty)? {
            breakdown.normal = e.value.as_f64();
            add_scaled(&mut grads.normal, &e.grad, T::lit(w.normal));
        }
    }
    if cfg.geo {
        let depth = targets.depth.expect("checked above");
        if let Some(e) = soft(geo_consistency_loss(&render.normal, depth), "geo", true, &mut empty)? {
            breakdown.geo = e.value.as_f64();
            add_scaled(&mut grads.normal, &e.grad, T::lit(w.geo));
        }
    }

    let mut splat_grads = backward(splats, targets.camera, &state, &grads);

    if cfg.scale {
        let (v, g) = scale_loss(splats);
        breakdown.scale = v.as_f64();
        let ws = T::lit(w.scale);
        for (sg, gs) in splat_grads.iter_mut().zip(g) {
            sg.scales += gs.scale(ws);
        }
    }

    let total = breakdown.weighted_total(w);
    Ok(Evaluation {
        total,
        breakdown,
        grads: splat_grads,
        render,
        state,
        empty_terms: empty,
    })
}

/// Objective value only (used by finite-difference checks).
pub fn loss_value<T: Real>(splats: &SplatSet<T>, targets: &FrameTargets<'_, T>, cfg: &LossConfig) -> Result<(f64, u64)> {
    let e = loss_and_grad(splats, targets, cfg)?;
    Ok((e.total, e.state.signature()))
}
