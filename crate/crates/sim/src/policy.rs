//! Scripted policies for evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{wrap_angle, Action};
use crate::env::{Env, Observation};
use crate::polygon::P2;

pub trait Policy {
    /// Called after every reset.
    fn begin(&mut self, _env: &Env) {}
    fn act(&mut self, env: &Env, obs: &Observation) -> Action;
}

/// Uniform random actions.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _env: &Env, _obs: &Observation) -> Action {
        Action::new(self.rng.gen_range(-1.0..=1.0), self.rng.gen_range(-1.0..=1.0))
    }
}

/// Pure pursuit along the A* path of the episode planning grid. Uses
/// privileged state, not the observation.
pub struct OraclePolicy {
    pub lookahead: f64,
    path: Vec<P2>,
    progress: usize,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            path: Vec::new(),
            progress: 0,
        }
    }
}

impl OraclePolicy {
    pub fn path(&self) -> &[P2] {
        &self.path
    }
}

impl Policy for OraclePolicy {
    fn begin(&mut self, env: &Env) {
        self.progress = 0;
        self.path.clear();
        let Some(ep) = env.episode() else { return };
        self.path.push(ep.start);
        if let Some(w) = ep.agent_grid.plan(ep.start, ep.goal) {
            self.path.extend(w);
        }
        self.path.push(ep.goal);
    }

    fn act(&mut self, env: &Env, _obs: &Observation) -> Action {
        let Some(ep) = env.episode() else {
            return Action::default();
        };
        let pos = ep.agent.position();
        let d = |a: P2, b: P2| (a[0] - b[0]).hypot(a[1] - b[1]);
        // Advance past waypoints already within reach.
        while self.progress + 1 < self.path.len() && d(self.path[self.progress], pos) < self.lookahead {
            self.progress += 1;
        }
        let target = self.path.get(self.progress).copied().unwrap_or(ep.goal);
        let alpha = wrap_angle((target[1] - pos[1]).atan2(target[0] - pos[0]) - ep.agent.heading);
        let params = &env.scene().config.agent;
        let ld = d(target, pos).max(1e-6);
        let steer = (2.0 * params.wheelbase * alpha.sin() / ld).atan();
        let speed = if alpha.abs() > std::f64::consts::FRAC_PI_2 { 0.4 } else { 1.0 };
        Action::new(steer / params.max_steer(), speed)
    }
}

/// Runs one episode to completion and returns its record.
pub fn rollout(env: &mut Env, policy: &mut dyn Policy, seed: Option<u64>) -> crate::error::Result<crate::metrics::EpisodeRecord> {
    let mut obs = env.reset(seed)?;
    policy.begin(env);
    loop {
        let a = policy.act(env, &obs);
        let r = env.step(a)?;
        obs = r.observation;
        if r.terminated || r.truncated {
            break;
        }
    }
    Ok(env.record().expect("episode ended"))
}
