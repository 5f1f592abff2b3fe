//! The training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::culling::CullConfig;
use crate::dataset::FrameDataset;
use crate::error::{Error, Result};
use crate::image::psnr;
use crate::linalg::{Quat, Vec3};
use crate::losses::{pseudo_normals_from_depth, ssim, LossBreakdown, PseudoNormals, DEFAULT_PCA_RADIUS};
use crate::optim::adam::{adam_step, rates, AdamConfig, AdamState, LearningRates};
use crate::optim::densify::{densify_and_prune, DensifyConfig, DensifyOutcome, GradStats};
use crate::optim::objective::{loss_and_grad, FrameTargets, LossConfig};
use crate::raster::rasterize;
use crate::scalar::Real;
use crate::splat::{Splat, SplatSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Geometry terms (depth, normal, geo, scale) switch on at this iteration.
    pub geometry_start: usize,
    pub lr: LearningRates,
    pub adam: AdamConfig,
    pub densify: DensifyConfig,
    pub loss: LossConfig,
    pub pca_radius: usize,
    /// Overrides the extent derived from the camera centers.
    pub extent: Option<f64>,
    pub seed: u64,
    /// Record every iteration in the report when 1; every n-th otherwise.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 30_000,
            geometry_start: 500,
            lr: LearningRates::default(),
            adam: AdamConfig::default(),
            densify: DensifyConfig::default(),
            loss: LossConfig::default(),
            pca_radius: DEFAULT_PCA_RADIUS,
            extent: None,
            seed: 0,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    /// Defaults with the mean-rate decay matched to `iterations`.
    pub fn with_iterations(iterations: usize) -> Self {
        let mut cfg = Self {
            iterations,
            ..Self::default()
        };
        cfg.lr.mean_decay_steps = iterations.max(1);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub frame: usize,
    pub total: f64,
    pub breakdown: LossBreakdown,
    pub splat_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub frame: usize,
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations_run: usize,
    pub log: Vec<IterationLog>,
    pub densify_events: Vec<(usize, DensifyOutcome)>,
    pub initial_splats: usize,
    pub final_splats: usize,
    pub train_views: Vec<ViewMetrics>,
    pub test_views: Vec<ViewMetrics>,
}

impl TrainReport {
    pub fn mean_psnr(views: &[ViewMetrics]) -> Option<f64> {
        (!views.is_empty()).then(|| views.iter().map(|v| v.psnr).sum::<f64>() / views.len() as f64)
    }

    pub fn mean_ssim(views: &[ViewMetrics]) -> Option<f64> {
        (!views.is_empty()).then(|| views.iter().map(|v| v.ssim).sum::<f64>() / views.len() as f64)
    }
}

/// PSNR and SSIM of renders against the ground-truth images of `indices`.
pub fn evaluate_views<T: Real>(
    splats: &SplatSet<T>,
    dataset: &FrameDataset<T>,
    indices: &[usize],
    cull: Option<&CullConfig>,
) -> Result<Vec<ViewMetrics>> {
    indices
        .iter()
        .map(|&i| {
            let f = &dataset.frames[i];
            let r = rasterize(splats, &f.camera, cull)?;
            Ok(ViewMetrics {
                frame: i,
                name: f.name.clone(),
                psnr: psnr(&r.color, &f.image)?,
                ssim: ssim(&r.color, &f.image)?.as_f64(),
            })
        })
        .collect()
}

/// Splats centered on the given points with isotropic scale from the mean
/// nearest-neighbour spacing.
pub fn init_from_points<T: Real>(points: &[(Vec3<T>, Vec3<T>)], opacity: T) -> Result<SplatSet<T>> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty point cloud".into()));
    }
    let splats = points
        .iter()
        .enumerate()
        .map(|(i, (p, c))| {
            let nn = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (q, _))| (*q - *p).norm())
                .fold(T::infinity(), |a, b| a.min(b));
            let sigma = if nn.is_finite() && nn > T::zero() { nn } else { T::lit(0.01) };
            Splat::new(*p, Quat::identity(), Vec3::splat(sigma), opacity, c.map_clamp01())
        })
        .collect();
    Ok(SplatSet::new(splats))
}

trait Clamp01 {
    fn map_clamp01(self) -> Self;
}

impl<T: Real> Clamp01 for Vec3<T> {
    fn map_clamp01(self) -> Self {
        Vec3::new(self.x.clamp01(), self.y.clamp01(), self.z.clamp01())
    }
}

/// `n` splats uniformly placed in the box `[lo, hi]` with random colors.
pub fn random_init<T: Real>(n: usize, lo: Vec3<T>, hi: Vec3<T>, seed: u64) -> SplatSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = hi - lo;
    let volume = (span.x.abs().max(T::lit(1e-3)) * span.y.abs().max(T::lit(1e-3)) * span.z.abs().max(T::lit(1e-3)))
        .as_f64();
    let sigma = T::lit(0.5 * (volume / n.max(1) as f64).cbrt());
    (0..n)
        .map(|_| {
            let u = Vec3::new(
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
            );
            let c = Vec3::new(
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
            );
            Splat::isotropic(lo + span.component_mul(u), sigma, T::lit(0.1), c)
        })
        .collect()
}

/// Pseudo normals for a frame with dynamic pixels marked invalid.
pub fn frame_pseudo_normals<T: Real>(dataset: &FrameDataset<T>, index: usize, radius: usize) -> PseudoNormals<T> {
    let f = &dataset.frames[index];
    let mut p = pseudo_normals_from_depth(&f.depth, &f.camera, radius);
    if let Some(m) = &f.mask {
        for (v, &excluded) in p.valid.data.iter_mut().zip(&m.data) {
            *v &= !excluded;
        }
    }
    p
}

/// Optimizes `init` against the training frames of `dataset`.
pub fn train<T: Real>(
    dataset: &FrameDataset<T>,
    init: SplatSet<T>,
    cfg: &TrainConfig,
) -> Result<(SplatSet<T>, TrainReport)> {
    dataset.validate()?;
    init.validate()?;
    if cfg.iterations > 0 && cfg.geometry_start >= cfg.iterations && cfg.loss.with_geometry(true) != cfg.loss.with_geometry(false) {
        log::warn!(
            "geometry losses start at iteration {} but the run has {}; they will stay inactive",
            cfg.geometry_start,
            cfg.iterations
        );
    }
    let extent = cfg.extent.unwrap_or_else(|| dataset.scene_extent());
    let mut report = TrainReport {
        initial_splats: init.len(),
        ..Default::default()
    };
    let mut splats = init;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(splats.len());
    let mut stats = GradStats::new(splats.len());

    let pseudo: Vec<Option<PseudoNormals<T>>> = (0..dataset.len())
        .map(|i| {
            (cfg.loss.normal && dataset.train.contains(&i)).then(|| frame_pseudo_normals(dataset, i, cfg.pca_radius))
        })
        .collect();

    for it in 0..cfg.iterations {
        let frame_idx = dataset.train[rng.gen_range(0..dataset.train.len())];
        let frame = &dataset.frames[frame_idx];
        let loss_cfg = cfg.loss.with_geometry(it >= cfg.geometry_start);
        let targets = FrameTargets {
            camera: &frame.camera,
            image: &frame.image,
            depth: Some(&frame.depth),
            pseudo_normals: pseudo[frame_idx].as_ref(),
            mask: frame.mask.as_ref(),
        };
        let eval = loss_and_grad(&splats, &targets, &loss_cfg)?;
        if !eval.total.is_finite() || !eval.breakdown.is_finite() || !eval.grads.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                detail: format!("frame {} ({}): {:?}", frame_idx, frame.name, eval.breakdown),
            });
        }
        stats.record(&eval.grads, &eval.state.visible_indices());
        let lr = rates(&cfg.lr, extent, it);
        adam_step(&mut splats, &eval.grads, &mut adam, &lr, &cfg.adam);

        if cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
            report.log.push(IterationLog {
                iteration: it,
                frame: frame_idx,
                total: eval.total,
                breakdown: eval.breakdown,
                splat_count: splats.len(),
            });
        }
        if it % 500 == 0 {
            log::info!("iter {it}: loss {:.5} splats {}", eval.total, splats.len());
        }

        if cfg.densify.due(it + 1) {
            let (next, origin, outcome) = densify_and_prune(&splats, &stats, &cfg.densify, extent, &mut rng);
            adam = adam.remap(&origin);
            splats = next;
            stats = GradStats::new(splats.len());
            report.densify_events.push((it + 1, outcome));
        }
        report.iterations_run = it + 1;
    }

    report.final_splats = splats.len();
    report.train_views = evaluate_views(&splats, dataset, &dataset.train, None)?;
    report.test_views = evaluate_views(&splats, dataset, &dataset.test, None)?;
    Ok((splats, report))
}
