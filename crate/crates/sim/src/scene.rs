//! Scene configuration and loaded scene assets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use splatnav_core::checkpoint::load_checkpoint;
use splatnav_core::culling::{CullConfig, DEFAULT_CULL_ALPHA};
use splatnav_core::mesh::TriangleMesh;
use splatnav_core::SplatSet;

use crate::assets::{default_library, pedestrian_mesh, AssetSpec, ObstacleAsset};
use crate::camera_rig::{CameraMount, Perturbation};
use crate::collision::{Bvh, SweptDisc};
use crate::dynamics::BicycleParams;
use crate::error::{Result, SimError};
use crate::grid::{OccupancyGrid, DEFAULT_CELL};
use crate::polygon::{Polygon, P2};
use crate::reward::{Limits, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedestrianConfig {
    pub count: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    pub radius: f64,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        Self {
            count: 3,
            speed_min: 0.5,
            speed_max: 1.2,
            radius: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnConfig {
    pub min_distance: f64,
    pub max_distance: f64,
    pub min_obstacles: usize,
    pub max_obstacles: usize,
    /// Free space kept between obstacles and the start/goal discs.
    pub obstacle_clearance: f64,
    /// Half-width of the band around the start-goal segment where
    /// obstacles are placed.
    pub lateral_spread: f64,
    /// Initial heading deviates from the goal direction by at most this.
    pub heading_jitter_deg: f64,
    pub max_attempts: usize,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            min_distance: 10.0,
            max_distance: 30.0,
            min_obstacles: 0,
            max_obstacles: 5,
            obstacle_clearance: 0.5,
            lateral_spread: 1.0,
            heading_jitter_deg: 15.0,
            max_attempts: 1000,
        }
    }
}

/// Vertical extent of the agent body used for collision queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyConfig {
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        Self { z_min: 0.1, z_max: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub name: String,
    /// Splat checkpoint, relative to the config file.
    pub splats: Option<String>,
    /// Collision mesh (OBJ, with optional binary sidecar).
    pub collision_mesh: Option<String>,
    pub walkable: Polygon,
    pub ground_z: f64,
    pub obstacles: Vec<AssetSpec>,
    pub pedestrians: PedestrianConfig,
    pub spawn: SpawnConfig,
    pub camera: CameraMount,
    pub perturbation: Perturbation,
    pub agent: BicycleParams,
    pub body: BodyConfig,
    pub reward: RewardWeights,
    pub limits: Limits,
    /// Screen-space culling threshold for observation renders; 0 disables
    /// culling.
    pub cull_alpha: f64,
    pub grid_cell: f64,
    pub frame_stack: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            name: "scene".into(),
            splats: None,
            collision_mesh: None,
            walkable: Polygon::rectangle([0.0, -2.0], [40.0, 2.0]),
            ground_z: 0.0,
            obstacles: default_library(),
            pedestrians: PedestrianConfig::default(),
            spawn: SpawnConfig::default(),
            camera: CameraMount::default(),
            perturbation: Perturbation::default(),
            agent: BicycleParams::default(),
            body: BodyConfig::default(),
            reward: RewardWeights::default(),
            limits: Limits::default(),
            cull_alpha: DEFAULT_CULL_ALPHA,
            grid_cell: DEFAULT_CELL,
            frame_stack: 6,
            base_dir: PathBuf::from("."),
        }
    }
}

impl SceneConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml(&text)?
        } else {
            Self::from_json(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e == "toml") {
            toml::to_string_pretty(self).map_err(|e| SimError::Config(e.to_string()))?
        } else {
            serde_json::to_string_pretty(self)?
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.walkable.validate()?;
        let bad = |m: &str| Err(SimError::Config(m.into()));
        let s = &self.spawn;
        if !(s.min_distance > 0.0 && s.max_distance >= s.min_distance) {
            return bad("spawn distances must satisfy 0 < min <= max");
        }
        if s.min_obstacles > s.max_obstacles {
            return bad("spawn min_obstacles exceeds max_obstacles");
        }
        if s.max_attempts == 0 {
            return bad("spawn max_attempts must be positive");
        }
        let p = &self.pedestrians;
        if !(p.speed_min > 0.0 && p.speed_max >= p.speed_min && p.radius > 0.0) {
            return bad("pedestrian speeds and radius must be positive with min <= max");
        }
        let a = &self.agent;
        if !(a.wheelbase > 0.0 && a.max_steer_deg > 0.0 && a.max_steer_deg < 90.0 && a.v_max > 0.0 && a.radius > 0.0) {
            return bad("agent wheelbase, speed and radius must be positive and max steer in (0, 90)");
        }
        if !(self.body.z_max > self.body.z_min) {
            return bad("body z_max must exceed z_min");
        }
        if !(self.grid_cell > 0.0) {
            return bad("grid_cell must be positive");
        }
        if self.frame_stack == 0 {
            return bad("frame_stack must be at least 1");
        }
        if self.camera.width == 0 || self.camera.rows == 0 || !(self.camera.focal > 0.0) {
            return bad("camera size and focal must be positive");
        }
        if self.perturbation.position < 0.0 || self.perturbation.rotation_deg < 0.0 {
            return bad("perturbation magnitudes must be non-negative");
        }
        if self.cull_alpha != 0.0 {
            CullConfig::new(self.cull_alpha)?;
        }
        Ok(())
    }

    pub fn cull(&self) -> Option<CullConfig> {
        (self.cull_alpha != 0.0).then_some(CullConfig {
            alpha: self.cull_alpha,
            enabled: true,
        })
    }
}

/// Loaded, immutable scene shared by environments.
#[derive(Debug)]
pub struct Scene {
    pub config: SceneConfig,
    pub splats: Option<SplatSet<f32>>,
    pub static_mesh: TriangleMesh,
    pub static_bvh: Bvh,
    pub library: Vec<ObstacleAsset>,
    pub pedestrian_mesh: TriangleMesh,
    /// Agent-clearance grid with static geometry only; used for shortest
    /// path lengths.
    pub free_grid: OccupancyGrid,
}

impl Scene {
    pub fn load(config: SceneConfig) -> Result<Arc<Self>> {
        config.validate()?;
        let splats = match &config.splats {
            Some(p) => Some(load_checkpoint::<f32>(&config.base_dir.join(p))?),
            None => None,
        };
        let mesh = match &config.collision_mesh {
            Some(p) => TriangleMesh::load(&config.base_dir.join(p))?,
            None => TriangleMesh::default(),
        };
        Self::from_parts(config, splats, mesh)
    }

    pub fn from_parts(config: SceneConfig, splats: Option<SplatSet<f32>>, static_mesh: TriangleMesh) -> Result<Arc<Self>> {
        config.validate()?;
        if let Some(s) = &splats {
            s.validate()?;
        }
        static_mesh.validate()?;
        let library = config
            .obstacles
            .iter()
            .map(|spec| ObstacleAsset::load(spec, &config.base_dir))
            .collect::<Result<Vec<_>>>()?;
        let static_bvh = Bvh::from_meshes([&static_mesh]);
        let free_grid = occupancy(&config, &static_bvh, config.agent.radius, &[]);
        if !free_grid.free.iter().any(|&f| f) {
            return Err(SimError::Config("walkable region has no free cell for the agent".into()));
        }
        let pedestrian_mesh = pedestrian_mesh(config.pedestrians.radius);
        Ok(Arc::new(Self {
            config,
            splats,
            static_mesh,
            static_bvh,
            library,
            pedestrian_mesh,
            free_grid,
        }))
    }

    pub fn body_disc(&self, from: P2, to: P2, radius: f64) -> SweptDisc {
        SweptDisc {
            from,
            to,
            radius,
            z_min: self.config.ground_z + self.config.body.z_min,
            z_max: self.config.ground_z + self.config.body.z_max,
        }
    }
}

/// Grid over the walkable polygon where a disc of `radius` fits: inside the
/// polygon, clear of the static mesh and of the given `(center, radius)`
/// footprints.
pub fn occupancy(cfg: &SceneConfig, bvh: &Bvh, radius: f64, footprints: &[(P2, f64)]) -> OccupancyGrid {
    let slab = (cfg.ground_z + cfg.body.z_min, cfg.ground_z + cfg.body.z_max);
    OccupancyGrid::from_polygon(&cfg.walkable, cfg.grid_cell, radius, |c| {
        footprints
            .iter()
            .any(|(p, r)| (p[0] - c[0]).hypot(p[1] - c[1]) <= r + radius)
            || bvh.any_hit(&SweptDisc::stationary(c, radius, slab.0, slab.1))
    })
}
