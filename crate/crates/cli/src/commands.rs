//! Implementations behind the `splatnav` subcommands.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use splatnav_core::checkpoint::{load_checkpoint, save_checkpoint};
use splatnav_core::dataset::{load_dataset, save_dataset, write_rgb_png};
use splatnav_core::mesh::{
    connected_ground, default_seed_region, extract_mesh, fusable_depth, ground_mask, remove_ground, FusionConfig, GroundMask,
    GroundRemoval, GroundView, TriangleMesh, VectorGround, DEFAULT_GROUND_ANGLE_DEG, DEFAULT_MAX_REL_JUMP,
};
use splatnav_core::optim::train::{evaluate_views, init_from_points, ViewMetrics};
use splatnav_core::synthetic::{orbit_cameras, self_reconstruction_scene};
use splatnav_core::{rasterize, Camera, CullConfig, FrameDataset, Image, SplatSet, TrainConfig, TrainReport, Vec3};
use splatnav_sim::demo::default_corridor;
use splatnav_sim::{
    compute_metrics, rollout, Action, Env, EnvOptions, EpisodeRecord, Metrics, Observation, OraclePolicy, Policy,
    RandomPolicy, Scene, SceneConfig, Task,
};

use crate::protocol::encode_observation;

/// Splats initialized from depth back-projected at every `stride`-th pixel
/// of the training frames, capped at `max_points`.
pub fn depth_init(dataset: &FrameDataset<f32>, stride: usize, max_points: usize) -> Result<SplatSet<f32>> {
    let stride = stride.max(1);
    let mut pts = Vec::new();
    for &i in &dataset.train {
        let f = &dataset.frames[i];
        let cam = &f.camera;
        for row in (stride / 2..cam.height).step_by(stride) {
            for col in (stride / 2..cam.width).step_by(stride) {
                let z = f.depth.get(row, col, 0);
                if !(z > 0.0 && z.is_finite()) || f.mask.as_ref().is_some_and(|m| m.get(row, col)) {
                    continue;
                }
                let p = cam.camera_to_world(cam.unproject(row, col, z));
                let c = f.image.pixel(row, col);
                pts.push((p, Vec3::new(c[0], c[1], c[2])));
            }
        }
    }
    if pts.len() > max_points {
        let step = pts.len() as f64 / max_points as f64;
        pts = (0..max_points).map(|k| pts[(k as f64 * step) as usize]).collect();
    }
    Ok(init_from_points(&pts, 0.1)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructReport {
    pub iterations: usize,
    pub initial_splats: usize,
    pub final_splats: usize,
    pub train_psnr: Option<f64>,
    pub test_psnr: Option<f64>,
    pub test_ssim: Option<f64>,
    pub final_loss: Option<f64>,
}

pub struct ReconstructArgs<'a> {
    pub scene: &'a Path,
    pub iters: usize,
    pub out: &'a Path,
    pub init: Option<&'a Path>,
    pub geometry: bool,
    pub seed: u64,
    pub max_init_points: usize,
}

pub fn reconstruct(a: &ReconstructArgs<'_>) -> Result<(SplatSet<f32>, TrainReport, ReconstructReport)> {
    let dataset: FrameDataset<f32> =
        load_dataset(a.scene).with_context(|| format!("loading dataset {}", a.scene.display()))?;
    let init = match a.init {
        Some(p) => load_checkpoint(p).with_context(|| format!("loading {}", p.display()))?,
        None => depth_init(&dataset, 8, a.max_init_points)?,
    };
    let mut cfg = TrainConfig::with_iterations(a.iters);
    cfg.seed = a.seed;
    cfg.log_every = 100;
    cfg.loss = cfg.loss.with_geometry(a.geometry);
    let (splats, report) = splatnav_core::train(&dataset, init, &cfg)?;
    save_checkpoint(a.out, &splats)?;
    let summary = ReconstructReport {
        iterations: report.iterations_run,
        initial_splats: report.initial_splats,
        final_splats: report.final_splats,
        train_psnr: TrainReport::mean_psnr(&report.train_views),
        test_psnr: TrainReport::mean_psnr(&report.test_views),
        test_ssim: TrainReport::mean_ssim(&report.test_views),
        final_loss: report.log.last().map(|l| l.total),
    };
    Ok((splats, report, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundMode {
    Masks,
    Vector,
    None,
}

pub struct ExtractArgs<'a> {
    pub ckpt: &'a Path,
    pub scene: Option<&'a Path>,
    pub out: &'a Path,
    pub voxel: f64,
    pub truncation: Option<f64>,
    pub ground: GroundMode,
    pub ground_angle: f64,
}

/// Fusion views: dataset cameras, or an orbit around the splats.
fn fusion_cameras(splats: &SplatSet<f32>, scene: Option<&Path>) -> Result<Vec<Camera<f32>>> {
    if let Some(dir) = scene {
        let ds: FrameDataset<f32> = load_dataset(dir)?;
        return Ok(ds.train.iter().map(|&i| ds.frames[i].camera).collect());
    }
    let (lo, hi) = splats.bounds().context("checkpoint has no splats")?;
    let c = (lo + hi).scale(0.5);
    let r = (hi - lo).norm().max(1e-3);
    let r = r as f64;
    Ok(orbit_cameras(24, 1.2 * r, 0.5 * r, c, 160.0, 160, 120))
}

pub fn extract(a: &ExtractArgs<'_>) -> Result<(TriangleMesh, TriangleMesh)> {
    let splats: SplatSet<f32> = load_checkpoint(a.ckpt)?;
    let cams = fusion_cameras(&splats, a.scene)?;
    let cfg = FusionConfig {
        voxel_size: a.voxel,
        truncation: a.truncation.unwrap_or(4.0 * a.voxel),
        ..FusionConfig::default()
    };
    let mesh = extract_mesh(&splats, &cams, &cfg)?;
    let vector = VectorGround {
        delta_deg: a.ground_angle,
        ..VectorGround::default()
    };
    let cleaned = match a.ground {
        GroundMode::None => mesh.clone(),
        GroundMode::Vector => remove_ground::<f32>(&mesh, &GroundRemoval::Vector(vector)),
        GroundMode::Masks => {
            let mut masks: Vec<(GroundMask, Image<f32>)> = Vec::new();
            for cam in &cams {
                let r = rasterize(&splats, cam, None)?;
                let seed = default_seed_region(cam.width, cam.height, 0.2);
                let depth = fusable_depth(&r, cfg.min_alpha);
                match ground_mask(&r.normal, &seed, a.ground_angle)
                    .and_then(|m| connected_ground(&m, &seed, &depth, DEFAULT_MAX_REL_JUMP))
                {
                    Ok(m) => masks.push((m, depth)),
                    Err(e) => log::warn!("skipping view without ground seed: {e}"),
                }
            }
            let views: Vec<GroundView<'_, f32>> = cams
                .iter()
                .zip(&masks)
                .map(|(c, (m, d))| GroundView {
                    camera: c,
                    mask: m,
                    depth: Some(d),
                })
                .collect();
            remove_ground(
                &mesh,
                &GroundRemoval::Masks {
                    views,
                    occlusion_tolerance: 2.0 * a.voxel,
                    fallback: Some(vector),
                },
            )
        }
    };
    cleaned.save(a.out)?;
    Ok((mesh, cleaned))
}

pub fn load_scene(config: Option<&Path>, obstacles: Option<usize>) -> Result<Arc<Scene>> {
    let (mut cfg, splats, mesh) = match config {
        Some(p) => {
            let cfg = SceneConfig::load(p).with_context(|| format!("loading scene config {}", p.display()))?;
            (cfg, None, None)
        }
        None => {
            log::info!("no scene config given; using the built-in corridor");
            let (c, s, m) = default_corridor();
            (c, Some(s), Some(m))
        }
    };
    if let Some(n) = obstacles {
        cfg.spawn.min_obstacles = n;
        cfg.spawn.max_obstacles = n;
    }
    Ok(match (splats, mesh) {
        (Some(s), Some(m)) => Scene::from_parts(cfg, Some(s), m)?,
        _ => Scene::load(cfg)?,
    })
}

/// Forwards observations to an external agent over TCP and reads actions.
/// Each line sent is `{"obs": ..., "info": {...}}`; each reply must be
/// `{"action": [steer, speed]}`.
pub struct RemotePolicy {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl RemotePolicy {
    pub fn connect(addr: &str) -> Result<Self> {
        let s = TcpStream::connect(addr).with_context(|| format!("connecting to policy at {addr}"))?;
        Ok(Self {
            reader: BufReader::new(s.try_clone()?),
            writer: s,
        })
    }

    fn query(&mut self, env: &Env, obs: &Observation) -> Result<Action> {
        let ep = env.episode().context("no episode")?;
        let msg = json!({"obs": encode_observation(obs), "info": {"seed": ep.seed, "step": ep.steps}});
        serde_json::to_writer(&mut self.writer, &msg)?;
        self.writer.write_all(b"\n")?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            bail!("policy closed the connection");
        }
        let v: serde_json::Value = serde_json::from_str(&line)?;
        let a = v["action"].as_array().context("reply lacks \"action\" array")?;
        match (a.first().and_then(|x| x.as_f64()), a.get(1).and_then(|x| x.as_f64())) {
            (Some(s), Some(p)) => Ok(Action::new(s, p)),
            _ => bail!("action must hold two numbers"),
        }
    }
}

impl Policy for RemotePolicy {
    fn act(&mut self, env: &Env, obs: &Observation) -> Action {
        self.query(env, obs).unwrap_or_else(|e| {
            log::error!("remote policy: {e}; sending zero action");
            Action::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Oracle,
    Random,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub policy: PolicyKind,
    pub seed: u64,
    pub summary: Metrics,
    pub episodes: Vec<EpisodeRecord>,
}

pub fn evaluate(
    scene: Arc<Scene>,
    task: Task,
    episodes: usize,
    policy: PolicyKind,
    seed: u64,
    remote: Option<&str>,
) -> Result<EvalReport> {
    let mut env = Env::new(scene, EnvOptions { task, seed });
    let mut p: Box<dyn Policy> = match policy {
        PolicyKind::Oracle => Box::new(OraclePolicy::default()),
        PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
        PolicyKind::Remote => Box::new(RemotePolicy::connect(remote.context("--remote ADDR is required")?)?),
    };
    let mut records = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let r = rollout(&mut env, p.as_mut(), None)?;
        log::info!(
            "episode {k}: {:?} in {} steps, {} collisions",
            r.reason,
            r.steps,
            r.collisions
        );
        records.push(r);
    }
    Ok(EvalReport {
        task,
        policy,
        seed,
        summary: compute_metrics(&records),
        episodes: records,
    })
}

pub fn format_metrics(m: &Metrics) -> String {
    format!(
        "{:>8} {:>8} {:>8} {:>8} {:>8}\n{:>8} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
        "episodes", "SR", "SPL", "SNS", "Cost", m.episodes, m.sr, m.spl, m.sns, m.cost
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

pub fn render_views(
    ckpt: &Path,
    scene: &Path,
    split: Split,
    out: &Path,
    cull: Option<CullConfig>,
) -> Result<Vec<ViewMetrics>> {
    let splats: SplatSet<f32> = load_checkpoint(ckpt)?;
    let ds: FrameDataset<f32> = load_dataset(scene)?;
    let idx: Vec<usize> = match split {
        Split::Train => ds.train.clone(),
        Split::Test => ds.test.clone(),
        Split::All => (0..ds.len()).collect(),
    };
    std::fs::create_dir_all(out)?;
    for &i in &idx {
        let f = &ds.frames[i];
        let r = rasterize(&splats, &f.camera, cull.as_ref())?;
        let stem = Path::new(&f.name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(format!("{i}"));
        write_rgb_png(&out.join(format!("{stem}.png")), &r.color)?;
    }
    Ok(evaluate_views(&splats, &ds, &idx, cull.as_ref())?)
}

/// Writes the built-in corridor: splat checkpoint, collision mesh and a
/// scene config referencing both.
pub fn demo_scene(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let (mut cfg, splats, mesh) = default_corridor();
    save_checkpoint(&out.join("corridor.splat"), &splats)?;
    mesh.save(&out.join("corridor.obj"))?;
    cfg.splats = Some("corridor.splat".into());
    cfg.collision_mesh = Some("corridor.obj".into());
    let path = out.join("scene.json");
    cfg.save(&path)?;
    Ok(path)
}

/// Writes a small posed dataset rendered from a known synthetic scene.
pub fn demo_dataset(out: &Path, views: usize, seed: u64) -> Result<()> {
    let s = self_reconstruction_scene::<f32>(50, views, 64, 64, seed)?;
    save_dataset(out, &s.dataset.frames)?;
    save_checkpoint(&out.join("truth.splat"), &s.truth)?;
    save_checkpoint(&out.join("init.splat"), &s.init)?;
    Ok(())
}

/// Runs one episode, saving each observation frame as PNG when `frames` is
/// given. Returns per-step `(reward, terminated, truncated)` lines.
pub fn simulate(
    scene: Arc<Scene>,
    task: Task,
    policy: PolicyKind,
    seed: u64,
    max_steps: usize,
    frames: Option<&Path>,
) -> Result<Vec<serde_json::Value>> {
    let mut env = Env::new(scene, EnvOptions { task, seed });
    let mut p: Box<dyn Policy> = match policy {
        PolicyKind::Oracle => Box::new(OraclePolicy::default()),
        PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
        PolicyKind::Remote => bail!("simulate supports oracle and random policies"),
    };
    if let Some(d) = frames {
        std::fs::create_dir_all(d)?;
    }
    let mut obs = env.reset(Some(seed))?;
    p.begin(&env);
    let mut log = Vec::new();
    for step in 0..max_steps {
        if let Some(d) = frames {
            write_rgb_png(&d.join(format!("{step:05}.png")), obs.frames.last().expect("stack"))?;
        }
        let a = p.act(&env, &obs);
        let r = env.step(a)?;
        log.push(json!({
            "step": step + 1,
            "action": [a.steer, a.speed],
            "reward": r.reward,
            "breakdown": r.breakdown,
            "terminated": r.terminated,
            "truncated": r.truncated,
        }));
        obs = r.observation;
        if r.terminated || r.truncated {
            break;
        }
    }
    Ok(log)
}

pub const DEFAULT_GROUND_ANGLE: f64 = DEFAULT_GROUND_ANGLE_DEG;
