//! Built-in obstacle meshes and the pedestrian stand-in.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use splatnav_core::mesh::{box_mesh, TriangleMesh, P3};

use crate::error::{Result, SimError};

pub const BUILTIN_OBSTACLES: [&str; 4] = ["cone", "bin", "pole", "barrier"];

/// Closed vertical cylinder (or cone when `top_radius` is 0) standing on z = 0.
pub fn frustum(bottom_radius: f64, top_radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let mut v: Vec<P3> = Vec::new();
    for k in 0..segments {
        let a = TAU * k as f64 / segments as f64;
        v.push([bottom_radius * a.cos(), bottom_radius * a.sin(), 0.0]);
    }
    let apex = top_radius == 0.0;
    if apex {
        v.push([0.0, 0.0, height]);
    } else {
        for k in 0..segments {
            let a = TAU * k as f64 / segments as f64;
            v.push([top_radius * a.cos(), top_radius * a.sin(), height]);
        }
    }
    let bottom_c = v.len() as u32;
    v.push([0.0, 0.0, 0.0]);
    let top_c = v.len() as u32;
    if !apex {
        v.push([0.0, 0.0, height]);
    }
    let n = segments as u32;
    let mut f = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        f.push([bottom_c, k1, k]);
        if apex {
            f.push([k, k1, n]);
        } else {
            f.push([k, k1, n + k1]);
            f.push([k, n + k1, n + k]);
            f.push([top_c, n + k, n + k1]);
        }
    }
    TriangleMesh::new(v, f)
}

/// Mesh for a built-in obstacle name, standing on z = 0 and centered at the
/// origin.
pub fn builtin_obstacle(name: &str) -> Option<TriangleMesh> {
    Some(match name {
        "cone" => frustum(0.2, 0.0, 0.6, 16),
        "bin" => box_mesh([-0.3, -0.3, 0.0], [0.3, 0.3, 0.9]),
        "pole" => frustum(0.06, 0.06, 1.6, 12),
        "barrier" => box_mesh([-0.8, -0.15, 0.0], [0.8, 0.15, 1.0]),
        _ => return None,
    })
}

fn builtin_color(name: &str) -> [f64; 3] {
    match name {
        "cone" => [0.95, 0.45, 0.05],
        "bin" => [0.15, 0.45, 0.2],
        "pole" => [0.6, 0.6, 0.65],
        _ => [0.85, 0.8, 0.1],
    }
}

/// Pedestrian stand-in: a 1.7 m upright cylinder.
pub fn pedestrian_mesh(radius: f64) -> TriangleMesh {
    frustum(radius, radius * 0.8, 1.7, 12)
}

pub const PEDESTRIAN_COLOR: [f64; 3] = [0.55, 0.25, 0.6];

/// One library entry as written in a scene config. `mesh` is an OBJ path;
/// without it `name` must be a built-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub name: String,
    #[serde(default)]
    pub mesh: Option<String>,
    #[serde(default)]
    pub color: Option<[f64; 3]>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl AssetSpec {
    pub fn builtin(name: &str) -> Self {
        Self {
            name: name.into(),
            mesh: None,
            color: None,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleAsset {
    pub name: String,
    pub mesh: TriangleMesh,
    pub color: [f64; 3],
    /// Largest horizontal distance of any vertex from the local origin.
    pub footprint_radius: f64,
}

impl ObstacleAsset {
    pub fn new(name: &str, mesh: TriangleMesh, color: [f64; 3]) -> Result<Self> {
        if mesh.is_empty() {
            return Err(SimError::Config(format!("obstacle '{name}' has an empty mesh")));
        }
        let footprint_radius = mesh.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        Ok(Self {
            name: name.into(),
            mesh,
            color,
            footprint_radius,
        })
    }

    pub fn load(spec: &AssetSpec, base: &Path) -> Result<Self> {
        if !(spec.scale > 0.0 && spec.scale.is_finite()) {
            return Err(SimError::Config(format!("obstacle '{}' scale must be positive", spec.name)));
        }
        let mut mesh = match &spec.mesh {
            Some(p) => TriangleMesh::load(&base.join(p))?,
            None => builtin_obstacle(&spec.name).ok_or_else(|| {
                SimError::Config(format!(
                    "unknown built-in obstacle '{}' (expected one of {BUILTIN_OBSTACLES:?})",
                    spec.name
                ))
            })?,
        };
        for v in mesh.vertices.iter_mut() {
            *v = [v[0] * spec.scale, v[1] * spec.scale, v[2] * spec.scale];
        }
        let color = spec.color.unwrap_or_else(|| builtin_color(&spec.name));
        Self::new(&spec.name, mesh, color)
    }
}

pub fn default_library() -> Vec<AssetSpec> {
    BUILTIN_OBSTACLES.iter().map(|n| AssetSpec::builtin(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_closed_and_outward() {
        for name in BUILTIN_OBSTACLES {
            let m = builtin_obstacle(name).unwrap();
            assert_eq!(m.boundary_edge_count(), 0, "{name}");
            assert_eq!(m.euler_characteristic(), 2, "{name}");
            let (lo, hi) = m.bounds().unwrap();
            let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
            for f in 0..m.faces.len() {
                let n = m.face_normal(f);
                let p = m.face_centroid(f);
                let d = (p[0] - c[0]) * n[0] + (p[1] - c[1]) * n[1] + (p[2] - c[2]) * n[2];
                assert!(d > 0.0, "{name} face {f} points inward");
            }
        }
    }

    #[test]
    fn unknown_builtin_is_an_error() {
        assert!(ObstacleAsset::load(&AssetSpec::builtin("piano"), Path::new(".")).is_err());
    }
}
