//! Episode layout: start, goal, static obstacles and pedestrians.

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use splatnav_core::mesh::TriangleMesh;

use crate::collision::{Bvh, SweptDisc};
use crate::dynamics::{wrap_angle, AgentState};
use crate::error::{Result, SimError};
use crate::grid::OccupancyGrid;
use crate::polygon::P2;
use crate::reward::{RewardBreakdown, TerminalReason};
use crate::scene::{occupancy, Scene};

/// Extra clearance the agent planning grid keeps around obstacles.
pub const PLANNING_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    PointNav,
    SocialNav,
}

impl FromStr for Task {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pointnav" => Ok(Self::PointNav),
            "socialnav" => Ok(Self::SocialNav),
            _ => Err(SimError::Config(format!("unknown task '{s}' (expected pointnav or socialnav)"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PointNav => "pointnav",
            Self::SocialNav => "socialnav",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObstacle {
    pub asset: usize,
    pub name: String,
    pub position: P2,
    pub yaw: f64,
    pub footprint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub position: P2,
    /// Facing direction; tracks the walking direction with proportional
    /// control and only affects rendering.
    pub heading: f64,
    pub speed: f64,
    /// Remaining waypoints (grid cell centers).
    pub waypoints: Vec<P2>,
}

const HEADING_GAIN: f64 = 5.0;
const MAX_REPLANS: usize = 4;

impl Pedestrian {
    /// Walks `speed · dt` along the waypoint polyline, drawing a new random
    /// goal whenever the current path is used up.
    pub fn advance<R: Rng>(&mut self, dt: f64, grid: &OccupancyGrid, rng: &mut R) {
        let mut remaining = self.speed * dt;
        let mut replans = 0;
        let mut dir = None;
        while remaining > 0.0 {
            if self.waypoints.is_empty() {
                if replans == MAX_REPLANS {
                    break;
                }
                replans += 1;
                self.waypoints = random_route(grid, self.position, rng).unwrap_or_default();
                continue;
            }
            let t = self.waypoints[0];
            let d = (t[0] - self.position[0]).hypot(t[1] - self.position[1]);
            if d > 0.0 {
                dir = Some((t[1] - self.position[1]).atan2(t[0] - self.position[0]));
            }
            if d <= remaining {
                self.position = t;
                self.waypoints.remove(0);
                remaining -= d;
            } else {
                let k = remaining / d;
                self.position = [
                    self.position[0] + k * (t[0] - self.position[0]),
                    self.position[1] + k * (t[1] - self.position[1]),
                ];
                remaining = 0.0;
            }
        }
        if let Some(want) = dir {
            self.heading = wrap_angle(self.heading + wrap_angle(want - self.heading) * (HEADING_GAIN * dt).min(1.0));
        }
    }
}

fn random_route<R: Rng>(grid: &OccupancyGrid, from: P2, rng: &mut R) -> Option<Vec<P2>> {
    let start = grid.nearest_free(from)?;
    let cells = grid.free_cells();
    let goal = *cells.choose(rng)?;
    let path = grid.astar(start, goal)?;
    Some(path.cells.iter().map(|&c| grid.center(c)).collect())
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub seed: u64,
    pub task: Task,
    pub agent: AgentState,
    pub start: P2,
    pub goal: P2,
    pub obstacles: Vec<PlacedObstacle>,
    pub pedestrians: Vec<Pedestrian>,
    pub steps: usize,
    pub collisions: usize,
    pub path_length: f64,
    /// Control steps with a pedestrian inside the personal-space band.
    pub close_steps: usize,
    pub total_reward: f64,
    /// Accumulated crash penalty magnitude.
    pub cost: f64,
    pub last_reward: RewardBreakdown,
    pub terminal: Option<TerminalReason>,
    /// Factor applied to the spawn distance range when the region is small.
    pub distance_scale: f64,
    pub requested_obstacles: usize,
    /// Shortest start-goal path on the static-only grid.
    pub shortest_path: f64,
    pub agent_grid: OccupancyGrid,
    pub pedestrian_grid: OccupancyGrid,
    pub obstacle_meshes: Vec<TriangleMesh>,
    pub obstacle_bvh: Bvh,
    pub rng: ChaCha8Rng,
}

impl EpisodeState {
    pub fn distance_to_goal(&self) -> f64 {
        (self.goal[0] - self.agent.x).hypot(self.goal[1] - self.agent.y)
    }

    /// Goal as (distance, bearing in the agent frame wrapped to (-pi, pi]).
    pub fn goal_vector(&self) -> [f64; 2] {
        let bearing = (self.goal[1] - self.agent.y).atan2(self.goal[0] - self.agent.x);
        [self.distance_to_goal(), wrap_angle(bearing - self.agent.heading)]
    }

    pub fn is_live(&self) -> bool {
        self.terminal.is_none()
    }
}

fn sample_point<R: Rng>(scene: &Scene, rng: &mut R) -> Option<P2> {
    let g = &scene.free_grid;
    let cells = g.free_cells();
    let c = g.center(*cells.choose(rng)?);
    let h = 0.5 * g.cell;
    let p = [c[0] + rng.gen_range(-h..=h), c[1] + rng.gen_range(-h..=h)];
    let r = scene.config.agent.radius;
    let ok = scene.config.walkable.contains_disc(p, r) && !scene.static_bvh.any_hit(&scene.body_disc(p, p, r));
    ok.then_some(p)
}

fn dist(a: P2, b: P2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Lays out an episode. Fully determined by `(scene, task, seed)`.
pub fn spawn_episode(scene: &Scene, task: Task, seed: u64) -> Result<EpisodeState> {
    let cfg = &scene.config;
    let sp = &cfg.spawn;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = cfg.agent.radius;

    let diameter = cfg.walkable.diameter();
    let distance_scale = (0.9 * diameter / sp.max_distance).min(1.0);
    let (dmin, dmax) = (sp.min_distance * distance_scale, sp.max_distance * distance_scale);

    let mut pair = None;
    for _ in 0..sp.max_attempts {
        let (Some(s), Some(g)) = (sample_point(scene, &mut rng), sample_point(scene, &mut rng)) else {
            continue;
        };
        let d = dist(s, g);
        if d < dmin || d > dmax {
            continue;
        }
        if scene.free_grid.shortest_distance(s, g).is_some() {
            pair = Some((s, g));
            break;
        }
    }
    let (start, goal) = pair.ok_or_else(|| {
        SimError::Spawn(format!(
            "no start/goal pair {dmin:.2}-{dmax:.2} m apart after {} attempts",
            sp.max_attempts
        ))
    })?;

    let jitter = sp.heading_jitter_deg.to_radians();
    let bearing = (goal[1] - start[1]).atan2(goal[0] - start[0]);
    let heading = wrap_angle(bearing + if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 });
    let agent = AgentState::new(start[0], start[1], heading);

    // Static obstacles between start and goal, keeping the goal reachable.
    let requested_obstacles = if scene.library.is_empty() {
        0
    } else {
        rng.gen_range(sp.min_obstacles..=sp.max_obstacles)
    };
    let mut obstacles: Vec<PlacedObstacle> = Vec::new();
    let along = [goal[0] - start[0], goal[1] - start[1]];
    let len = dist(start, goal);
    let normal = [-along[1] / len, along[0] / len];
    for _ in 0..requested_obstacles {
        for _ in 0..sp.max_attempts {
            let asset = rng.gen_range(0..scene.library.len());
            let a = &scene.library[asset];
            let t = rng.gen_range(0.25..=0.75);
            let lateral = if sp.lateral_spread > 0.0 {
                rng.gen_range(-sp.lateral_spread..=sp.lateral_spread)
            } else {
                0.0
            };
            let yaw = rng.gen_range(0.0..TAU);
            let p = [
                start[0] + t * along[0] + lateral * normal[0],
                start[1] + t * along[1] + lateral * normal[1],
            ];
            let keep_out = a.footprint_radius + radius + sp.obstacle_clearance;
            if !cfg.walkable.contains(p) || dist(p, start) < keep_out || dist(p, goal) < keep_out {
                continue;
            }
            if obstacles.iter().any(|o| dist(o.position, p) < o.footprint + a.footprint_radius) {
                continue;
            }
            let mut footprints: Vec<(P2, f64)> = obstacles.iter().map(|o| (o.position, o.footprint)).collect();
            footprints.push((p, a.footprint_radius));
            let g = occupancy(cfg, &scene.static_bvh, radius + PLANNING_MARGIN, &footprints);
            if g.shortest_distance(start, goal).is_none() {
                continue;
            }
            obstacles.push(PlacedObstacle {
                asset,
                name: a.name.clone(),
                position: p,
                yaw,
                footprint: a.footprint_radius,
            });
            break;
        }
    }
    if obstacles.len() < requested_obstacles {
        log::warn!("placed {} of {} obstacles", obstacles.len(), requested_obstacles);
    }

    let footprints: Vec<(P2, f64)> = obstacles.iter().map(|o| (o.position, o.footprint)).collect();
    let agent_grid = occupancy(cfg, &scene.static_bvh, radius + PLANNING_MARGIN, &footprints);
    let pedestrian_grid = occupancy(cfg, &scene.static_bvh, cfg.pedestrians.radius, &footprints);
    let obstacle_meshes: Vec<TriangleMesh> = obstacles
        .iter()
        .map(|o| {
            scene.library[o.asset]
                .mesh
                .transformed(o.yaw, [o.position[0], o.position[1], cfg.ground_z])
        })
        .collect();
    let obstacle_bvh = Bvh::from_meshes(obstacle_meshes.iter());

    let mut pedestrians = Vec::new();
    if task == Task::SocialNav {
        let cells = pedestrian_grid.free_cells();
        let keep_away = radius + cfg.pedestrians.radius + 1.5;
        for _ in 0..cfg.pedestrians.count {
            let mut placed = None;
            for _ in 0..sp.max_attempts {
                let Some(&c) = cells.choose(&mut rng) else { break };
                let p = pedestrian_grid.center(c);
                if dist(p, start) < keep_away {
                    continue;
                }
                if let Some(route) = random_route(&pedestrian_grid, p, &mut rng) {
                    if !route.is_empty() {
                        placed = Some((p, route));
                        break;
                    }
                }
            }
            let (p, waypoints) = placed.ok_or_else(|| SimError::Spawn("could not place a pedestrian".into()))?;
            let speed = rng.gen_range(cfg.pedestrians.speed_min..=cfg.pedestrians.speed_max);
            let heading = (waypoints[0][1] - p[1]).atan2(waypoints[0][0] - p[0]);
            pedestrians.push(Pedestrian {
                position: p,
                heading,
                speed,
                waypoints,
            });
        }
    }

    let shortest_path = scene.free_grid.shortest_distance(start, goal).unwrap_or(len);
    Ok(EpisodeState {
        seed,
        task,
        agent,
        start,
        goal,
        obstacles,
        pedestrians,
        steps: 0,
        collisions: 0,
        path_length: 0.0,
        close_steps: 0,
        total_reward: 0.0,
        cost: 0.0,
        last_reward: RewardBreakdown::default(),
        terminal: None,
        distance_scale,
        requested_obstacles,
        shortest_path,
        agent_grid,
        pedestrian_grid,
        obstacle_meshes,
        obstacle_bvh,
        rng,
    })
}

/// Whether a swept agent disc touches static geometry, obstacles, or any
/// pedestrian.
pub fn agent_contact(scene: &Scene, ep: &EpisodeState, from: P2, to: P2) -> bool {
    let disc: SweptDisc = scene.body_disc(from, to, scene.config.agent.radius);
    scene.static_bvh.any_hit(&disc)
        || ep.obstacle_bvh.any_hit(&disc)
        || ep
            .pedestrians
            .iter()
            .any(|p| crate::collision::disc_contact(&disc, p.position, scene.config.pedestrians.radius))
}
