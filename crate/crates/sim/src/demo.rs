//! Procedural corridor used by the demo command and the tests.

use splatnav_core::mesh::{box_mesh, TriangleMesh};
use splatnav_core::synthetic::plane_texture;
use splatnav_core::{Quat, Splat, SplatSet, Vec3};

use crate::polygon::Polygon;
use crate::scene::SceneConfig;

const WALL_HEIGHT: f64 = 2.0;
const WALL_THICKNESS: f64 = 0.2;

/// Straight corridor along +x from 0 to `length`, `width` wide, centered on
/// y = 0. Returns the config, splats for visuals, and the wall mesh.
pub fn corridor(length: f64, width: f64, spacing: f64) -> (SceneConfig, SplatSet<f32>, TriangleMesh) {
    let half = width / 2.0;
    let s = spacing * 0.6;
    let mut splats = Vec::new();
    let nx = (length / spacing).ceil() as usize;
    let ny = (width / spacing).ceil() as usize;
    let nz = (WALL_HEIGHT / spacing).ceil() as usize;
    let flat = |mean: Vec3<f64>, scales: Vec3<f64>, c: [f64; 3]| {
        Splat::new(mean, Quat::identity(), scales, 0.95, Vec3::from_array(c)).cast::<f32>()
    };
    for i in 0..nx {
        let x = (i as f64 + 0.5) * spacing;
        for j in 0..ny {
            let y = -half + (j as f64 + 0.5) * spacing;
            let t = plane_texture(x * 0.3, y * 0.3);
            let c = [0.35 + 0.3 * t[0], 0.35 + 0.3 * t[0], 0.35 + 0.3 * t[1]];
            splats.push(flat(Vec3::new(x, y, 0.0), Vec3::new(s, s, 0.01), c));
        }
        for k in 0..nz {
            let z = (k as f64 + 0.5) * spacing;
            let stripe = ((x / 2.0).floor() as i64).rem_euclid(2) as f64;
            for (side, base) in [(-1.0, [0.7, 0.35, 0.3]), (1.0, [0.3, 0.45, 0.7])] {
                let c = [
                    base[0] * (0.75 + 0.25 * stripe),
                    base[1] * (0.75 + 0.25 * stripe),
                    base[2] * (0.75 + 0.25 * stripe) + 0.1 * z / WALL_HEIGHT,
                ];
                splats.push(flat(Vec3::new(x, side * half, z), Vec3::new(s, 0.01, s), c));
            }
        }
    }
    let mut mesh = box_mesh([0.0, half, 0.0], [length, half + WALL_THICKNESS, WALL_HEIGHT]);
    mesh.append(&box_mesh([0.0, -half - WALL_THICKNESS, 0.0], [length, -half, WALL_HEIGHT]));
    mesh.append(&box_mesh([-WALL_THICKNESS, -half, 0.0], [0.0, half, WALL_HEIGHT]));
    mesh.append(&box_mesh([length, -half, 0.0], [length + WALL_THICKNESS, half, WALL_HEIGHT]));
    let cfg = SceneConfig {
        name: "corridor".into(),
        walkable: Polygon::rectangle([0.0, -half], [length, half]),
        // Near-field splats of this coarse scene exceed the default
        // threshold; keep only the quarter-frame floaters culled.
        cull_alpha: 0.01,
        ..SceneConfig::default()
    };
    (cfg, SplatSet::new(splats), mesh)
}

/// The default 40 m × 4 m corridor.
pub fn default_corridor() -> (SceneConfig, SplatSet<f32>, TriangleMesh) {
    corridor(40.0, 4.0, 0.5)
}
