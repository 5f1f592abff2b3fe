//! Kinematic bicycle model.

use serde::{Deserialize, Serialize};

pub const PHYSICS_DT: f64 = 0.02;
pub const SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BicycleParams {
    pub wheelbase: f64,
    pub max_steer_deg: f64,
    pub v_max: f64,
    pub radius: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.8,
            max_steer_deg: 30.0,
            v_max: 1.5,
            radius: 0.3,
        }
    }
}

impl BicycleParams {
    pub fn max_steer(&self) -> f64 {
        self.max_steer_deg.to_radians()
    }

    /// Radius of the circle traced at full steer.
    pub fn min_turn_radius(&self) -> f64 {
        self.wheelbase / self.max_steer().tan()
    }
}

/// Normalized control input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub steer: f64,
    pub speed: f64,
}

impl Action {
    pub fn new(steer: f64, speed: f64) -> Self {
        Self { steer, speed }.clamped()
    }

    /// Clamps both channels into `[-1, 1]`; NaN becomes 0.
    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self {
            steer: c(self.steer),
            speed: c(self.speed),
        }
    }

    pub fn is_within_bounds(&self) -> bool {
        (-1.0..=1.0).contains(&self.steer) && (-1.0..=1.0).contains(&self.speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steer: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading,
            ..Self::default()
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// One physics step: heading first, then advance along the new heading.
pub fn step_dynamics(state: &AgentState, action: Action, params: &BicycleParams, dt: f64) -> AgentState {
    let a = action.clamped();
    let steer = a.steer * params.max_steer();
    let v = a.speed * params.v_max;
    let heading = wrap_angle(state.heading + v / params.wheelbase * steer.tan() * dt);
    AgentState {
        x: state.x + v * dt * heading.cos(),
        y: state.y + v * dt * heading.sin(),
        heading,
        speed: v,
        steer,
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_advance() {
        let p = BicycleParams {
            v_max: 1.0,
            ..Default::default()
        };
        let s = step_dynamics(&AgentState::default(), Action::new(0.0, 1.0), &p, 0.02);
        assert!((s.x - 0.02).abs() < 1e-15 && s.y == 0.0 && s.heading == 0.0);
    }

    #[test]
    fn zero_speed_stays_put() {
        let s0 = AgentState::new(1.0, 2.0, 0.3);
        let s = step_dynamics(&s0, Action::new(1.0, 0.0), &BicycleParams::default(), 0.02);
        assert_eq!((s.x, s.y, s.heading), (1.0, 2.0, 0.3));
    }

    #[test]
    fn actions_are_clamped() {
        let a = Action::new(3.0, f64::NAN);
        assert_eq!(a, Action { steer: 1.0, speed: 0.0 });
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
