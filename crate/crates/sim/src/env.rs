//! Environment: reset/step over a shared scene.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use splatnav_core::{rasterize, Camera, Image};

use crate::assets::PEDESTRIAN_COLOR;
use crate::camera_rig::{mount_camera, perturb_camera};
use crate::dynamics::{step_dynamics, Action, PHYSICS_DT, SUBSTEPS};
use crate::episode::{agent_contact, spawn_episode, EpisodeState, Task};
use crate::error::{Result, SimError};
use crate::metrics::EpisodeRecord;
use crate::render::{compose, render_meshes, Layer};
use crate::reward::{compute_reward, terminal_reason, RewardBreakdown, StepOutcome};
use crate::scene::Scene;

/// Stacked frames (oldest first, newest last) and the goal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frames: Vec<Image<f32>>,
    pub goal: [f64; 2],
}

impl Observation {
    /// Packed RGB8, frame-major: `stack × rows × width × 3` bytes.
    pub fn rgb8(&self) -> Vec<u8> {
        self.frames.iter().flat_map(|f| f.to_rgb8()).collect()
    }

    pub fn shape(&self) -> [usize; 4] {
        let f = &self.frames[0];
        [self.frames.len(), f.height, f.width, 3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
    pub info: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvOptions {
    pub task: Task,
    /// Seed used for the first reset without an explicit seed; later resets
    /// count up from it.
    pub seed: u64,
}

pub struct Env {
    scene: Arc<Scene>,
    options: EnvOptions,
    resets: u64,
    episode: Option<EpisodeState>,
    stack: VecDeque<Image<f32>>,
    last_frame: Option<Layer>,
    last_camera: Option<Camera<f64>>,
}

impl Env {
    pub fn new(scene: Arc<Scene>, options: EnvOptions) -> Self {
        Self {
            scene,
            options,
            resets: 0,
            episode: None,
            stack: VecDeque::new(),
            last_frame: None,
            last_camera: None,
        }
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn options(&self) -> EnvOptions {
        self.options
    }

    pub fn set_task(&mut self, task: Task) {
        self.options.task = task;
    }

    pub fn episode(&self) -> Option<&EpisodeState> {
        self.episode.as_ref()
    }

    /// Starts an episode. Without `seed`, the n-th reset uses `options.seed + n`.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Observation> {
        let seed = seed.unwrap_or_else(|| self.options.seed.wrapping_add(self.resets));
        self.resets += 1;
        let ep = spawn_episode(&self.scene, self.options.task, seed)?;
        self.episode = Some(ep);
        self.stack.clear();
        let frame = self.render_frame()?;
        let n = self.scene.config.frame_stack;
        for _ in 0..n {
            self.stack.push_back(frame.clone());
        }
        Ok(self.observation())
    }

    fn observation(&self) -> Observation {
        Observation {
            frames: self.stack.iter().cloned().collect(),
            goal: self.episode.as_ref().map(|e| e.goal_vector()).unwrap_or([0.0; 2]),
        }
    }

    /// Renders the current view with fresh camera noise and returns its color.
    fn render_frame(&mut self) -> Result<Image<f32>> {
        let scene = Arc::clone(&self.scene);
        let cfg = &scene.config;
        let ep = self.episode.as_mut().ok_or(SimError::NotStarted)?;
        let base = mount_camera(&ep.agent, &cfg.camera, cfg.ground_z);
        let cam = perturb_camera(&base, &cfg.perturbation, &mut ep.rng);
        let splat_layer = match &scene.splats {
            Some(s) if !s.is_empty() => {
                let cull = cfg.cull();
                Layer::from_splats(&rasterize(s, &cam.cast::<f32>(), cull.as_ref())?)
            }
            _ => Layer::empty(cam.width, cam.height),
        };
        let peds: Vec<_> = ep
            .pedestrians
            .iter()
            .map(|p| {
                scene
                    .pedestrian_mesh
                    .transformed(p.heading, [p.position[0], p.position[1], cfg.ground_z])
            })
            .collect();
        let mut items: Vec<_> = ep
            .obstacles
            .iter()
            .zip(&ep.obstacle_meshes)
            .map(|(o, m)| (m, scene.library[o.asset].color))
            .collect();
        items.extend(peds.iter().map(|m| (m, PEDESTRIAN_COLOR)));
        let fg = render_meshes(&items, &cam);
        let frame = compose(&splat_layer, &fg)?;
        let color = frame.color.clone();
        self.last_frame = Some(frame);
        self.last_camera = Some(cam);
        Ok(color)
    }

    /// Most recent composed frame (color and depth) and its camera.
    pub fn render(&self) -> Result<(&Layer, &Camera<f64>)> {
        match (&self.last_frame, &self.last_camera) {
            (Some(f), Some(c)) => Ok((f, c)),
            _ => Err(SimError::NotStarted),
        }
    }

    /// One control step: ten physics sub-steps, reward, termination, and a
    /// new observation.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let scene = Arc::clone(&self.scene);
        let cfg = &scene.config;
        let ep = self.episode.as_mut().ok_or(SimError::NotStarted)?;
        if !ep.is_live() {
            return Err(SimError::EpisodeOver);
        }
        let requested = action;
        let action = action.clamped();
        let prev_distance = ep.distance_to_goal();
        let prev_steer = ep.agent.steer;
        let mut collided = false;
        for _ in 0..SUBSTEPS {
            let EpisodeState {
                pedestrians,
                pedestrian_grid,
                rng,
                ..
            } = &mut *ep;
            for p in pedestrians.iter_mut() {
                p.advance(PHYSICS_DT, pedestrian_grid, rng);
            }
            let next = step_dynamics(&ep.agent, action, &cfg.agent, PHYSICS_DT);
            if agent_contact(&scene, ep, ep.agent.position(), next.position()) {
                collided = true;
                ep.agent.speed = 0.0;
                ep.agent.steer = next.steer;
            } else {
                ep.path_length += (next.x - ep.agent.x).hypot(next.y - ep.agent.y);
                ep.agent = next;
            }
        }
        ep.steps += 1;
        if collided {
            ep.collisions += 1;
        }
        let ped_limit = cfg.limits.personal_space + cfg.agent.radius + cfg.pedestrians.radius;
        if ep.pedestrians.iter().any(|p| {
            (p.position[0] - ep.agent.x).hypot(p.position[1] - ep.agent.y) <= ped_limit
        }) {
            ep.close_steps += 1;
        }
        let distance = ep.distance_to_goal();
        let inside = cfg.walkable.contains(ep.agent.position());
        let terminal = terminal_reason(distance, inside, ep.collisions, ep.steps, &cfg.limits);
        let breakdown = compute_reward(
            &StepOutcome {
                prev_distance,
                distance,
                prev_steer,
                steer: ep.agent.steer,
                speed: ep.agent.speed,
                collided,
                terminal,
            },
            &cfg.reward,
        );
        ep.terminal = terminal;
        ep.total_reward += breakdown.total;
        ep.cost -= breakdown.crash;
        ep.last_reward = breakdown;

        let frame = self.render_frame()?;
        self.stack.pop_front();
        self.stack.push_back(frame);
        let ep = self.episode.as_ref().expect("episode present");
        let info = json!({
            "step": ep.steps,
            "seed": ep.seed,
            "task": ep.task,
            "collisions": ep.collisions,
            "collided": collided,
            "distance": distance,
            "path_length": ep.path_length,
            "terminal_reason": ep.terminal,
            "success": ep.terminal.is_some_and(|t| t.is_success()),
            "distance_scale": ep.distance_scale,
            "action_clamped": !requested.is_within_bounds(),
            "agent": {"x": ep.agent.x, "y": ep.agent.y, "heading": ep.agent.heading, "speed": ep.agent.speed},
        });
        Ok(StepResult {
            observation: self.observation(),
            reward: breakdown.total,
            breakdown,
            terminated: terminal.is_some_and(|t| !t.is_truncation()),
            truncated: terminal.is_some_and(|t| t.is_truncation()),
            info,
        })
    }

    /// Summary of the current episode once it has ended.
    pub fn record(&self) -> Option<EpisodeRecord> {
        let ep = self.episode.as_ref()?;
        let reason = ep.terminal?;
        Some(EpisodeRecord {
            seed: ep.seed,
            task: ep.task,
            reason,
            success: reason.is_success(),
            steps: ep.steps,
            collisions: ep.collisions,
            path_length: ep.path_length,
            shortest_path: ep.shortest_path,
            close_steps: ep.close_steps,
            total_reward: ep.total_reward,
        })
    }

    /// JSON description of observation and action spaces.
    pub fn spec(&self) -> serde_json::Value {
        let c = &self.scene.config;
        json!({
            "observation": {
                "rgb": {"shape": [c.frame_stack, c.camera.rows, c.camera.width, 3], "dtype": "uint8", "encoding": "base64", "order": "oldest_first"},
                "goal": {"shape": [2], "dtype": "float64", "fields": ["distance_m", "bearing_rad"]},
            },
            "action": {"shape": [2], "low": -1.0, "high": 1.0, "fields": ["steer", "speed"]},
            "control_hz": 1.0 / (PHYSICS_DT * SUBSTEPS as f64),
            "physics_hz": 1.0 / PHYSICS_DT,
            "max_steps": c.limits.max_steps,
            "task": self.options.task,
        })
    }
}
