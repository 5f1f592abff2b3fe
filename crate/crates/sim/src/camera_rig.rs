//! Agent-mounted camera and its per-frame perturbation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use splatnav_core::{Camera, Mat3, Vec3};

use crate::dynamics::AgentState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraMount {
    /// Height of the optical center above the ground.
    pub height: f64,
    /// Offset ahead of the agent center.
    pub forward: f64,
    /// Downward tilt.
    pub pitch_deg: f64,
    pub focal: f64,
    pub width: usize,
    pub rows: usize,
}

impl Default for CameraMount {
    fn default() -> Self {
        Self {
            height: 0.8,
            forward: 0.2,
            pitch_deg: 5.0,
            focal: 64.0,
            width: 128,
            rows: 72,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    /// Per-axis bound of the uniform position noise, meters.
    pub position: f64,
    /// Per-axis bound of the uniform rotation noise, degrees.
    pub rotation_deg: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            position: 0.01,
            rotation_deg: 1.0,
        }
    }
}

impl Perturbation {
    pub fn none() -> Self {
        Self {
            position: 0.0,
            rotation_deg: 0.0,
        }
    }
}

/// Unperturbed camera for an agent pose; `ground_z` is the floor height.
pub fn mount_camera(agent: &AgentState, mount: &CameraMount, ground_z: f64) -> Camera<f64> {
    let (s, c) = agent.heading.sin_cos();
    let eye = Vec3::new(
        agent.x + mount.forward * c,
        agent.y + mount.forward * s,
        ground_z + mount.height,
    );
    let p = mount.pitch_deg.to_radians();
    let dir = Vec3::new(c * p.cos(), s * p.cos(), -p.sin());
    Camera::look_at(mount.focal, mount.width, mount.rows, eye, eye + dir, Vec3::new(0.0, 0.0, 1.0))
}

fn sym<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.gen_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Adds uniform noise to the camera position (world axes) and orientation
/// (camera axes). Zero magnitudes return the camera unchanged; six draws
/// are consumed either way so the stream stays aligned.
pub fn perturb_camera<R: Rng>(cam: &Camera<f64>, p: &Perturbation, rng: &mut R) -> Camera<f64> {
    let (d, a) = sample_noise(p, rng);
    if p.position == 0.0 && p.rotation_deg == 0.0 {
        return *cam;
    }
    let eye = cam.center() + Vec3::new(d[0], d[1], d[2]);
    let noise = Mat3::rot_x(a[0]).mul_mat(&Mat3::rot_y(a[1])).mul_mat(&Mat3::rot_z(a[2]));
    // w2c' = noiseᵀ · w2c, i.e. the noise rotates the camera in its own frame.
    let rotation = noise.transpose().mul_mat(&cam.rotation);
    let mut out = *cam;
    out.rotation = rotation;
    out.translation = -rotation.mul_vec(eye);
    out
}

/// Sampled noise, exposed for tests: position offset and rotation angles.
pub fn sample_noise<R: Rng>(p: &Perturbation, rng: &mut R) -> ([f64; 3], [f64; 3]) {
    let d = [sym(rng, p.position), sym(rng, p.position), sym(rng, p.position)];
    let r = p.rotation_deg.to_radians();
    (d, [sym(rng, r), sym(rng, r), sym(rng, r)])
}
