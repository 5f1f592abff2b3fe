//! Absolute screen-gradient densification and opacity pruning.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::backward::SplatGrad;
use crate::linalg::Vec3;
use crate::scalar::Real;
use crate::splat::{Splat, SplatSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyConfig {
    pub enabled: bool,
    /// Mean absolute screen-space positional gradient that triggers growth.
    pub grad_threshold: f64,
    pub interval: usize,
    pub start: usize,
    pub stop: usize,
    pub prune_opacity: f64,
    /// Splats whose largest scale exceeds this fraction of the scene extent
    /// are split; smaller ones are cloned.
    pub percent_dense: f64,
    pub split_factor: f64,
    pub max_splats: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            grad_threshold: 4e-4,
            interval: 100,
            start: 500,
            stop: 15_000,
            prune_opacity: 0.005,
            percent_dense: 0.01,
            split_factor: 1.6,
            max_splats: 500_000,
        }
    }
}

impl DensifyConfig {
    pub fn due(&self, iteration: usize) -> bool {
        self.enabled
            && self.interval > 0
            && iteration >= self.start
            && iteration < self.stop
            && iteration > 0
            && iteration % self.interval == 0
    }
}

/// Accumulated screen-gradient statistics since the last densification.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStats {
    pub accum: Vec<f64>,
    pub count: Vec<u32>,
}

impl GradStats {
    pub fn new(n: usize) -> Self {
        Self {
            accum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    /// Adds one iteration; `visible` are the splats that touched a pixel.
    pub fn record<T: Real>(&mut self, grads: &[SplatGrad<T>], visible: &[usize]) {
        for &i in visible {
            let g = grads[i].mean2d_abs;
            self.accum[i] += (g.x.as_f64().powi(2) + g.y.as_f64().powi(2)).sqrt();
            self.count[i] += 1;
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.accum[i] / self.count[i] as f64
        }
    }
}

/// What happened during one densify/prune pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensifyOutcome {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

/// Clones small and splits large high-gradient splats, then drops splats
/// below the opacity threshold. Returns the new set and, per new splat, the
/// index of the splat whose optimizer state it inherits.
pub fn densify_and_prune<T: Real, R: Rng>(
    splats: &SplatSet<T>,
    stats: &GradStats,
    cfg: &DensifyConfig,
    extent: f64,
    rng: &mut R,
) -> (SplatSet<T>, Vec<Option<usize>>, DensifyOutcome) {
    let mut out = Vec::with_capacity(splats.len());
    let mut origin = Vec::with_capacity(splats.len());
    let mut outcome = DensifyOutcome::default();
    let mut budget = cfg.max_splats.saturating_sub(splats.len());
    let big = cfg.percent_dense * extent;
    let factor = T::lit(cfg.split_factor);

    for (i, s) in splats.iter().enumerate() {
        let hot = stats.mean(i) > cfg.grad_threshold;
        if !hot || budget == 0 {
            out.push(*s);
            origin.push(Some(i));
            continue;
        }
        budget -= 1;
        if s.scales.max_component().as_f64() > big {
            let r = s.rotation.to_rotation_matrix();
            for _ in 0..2 {
                let local = Vec3::new(
                    s.scales.x * T::lit(StandardNormal.sample(rng)),
                    s.scales.y * T::lit(StandardNormal.sample(rng)),
                    s.scales.z * T::lit(StandardNormal.sample(rng)),
                );
                let mut child = *s;
                child.mean = s.mean + r.mul_vec(local);
                child.scales = s.scales.scale(T::one() / factor);
                out.push(child);
                origin.push(None);
            }
            outcome.split += 1;
        } else {
            out.push(*s);
            origin.push(Some(i));
            out.push(*s);
            origin.push(None);
            outcome.cloned += 1;
        }
    }

    let prune = T::lit(cfg.prune_opacity);
    let mut keep: Vec<bool> = out.iter().map(|s: &Splat<T>| !(s.opacity < prune)).collect();
    if !keep.iter().any(|k| *k) {
        // Never prune to an empty scene.
        keep.fill(true);
    }
    outcome.pruned = keep.iter().filter(|k| !**k).count();
    let (kept, kept_origin): (Vec<_>, Vec<_>) = out
        .into_iter()
        .zip(origin)
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p)
        .unzip();
    (SplatSet::new(kept), kept_origin, outcome)
}
