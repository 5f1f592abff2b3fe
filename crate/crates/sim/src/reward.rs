//! Shaped reward and terminal rules.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Magnitude applied to the (negative) time term.
    pub c4: f64,
    pub success: f64,
    pub failure: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 0.05,
            c3: 1.0,
            c4: 0.1,
            success: 10.0,
            failure: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Success,
    OutOfWalkable,
    CollisionLimit,
    Timeout,
}

impl TerminalReason {
    pub fn is_success(self) -> bool {
        self == Self::Success
    }

    /// Timeouts truncate; everything else terminates.
    pub fn is_truncation(self) -> bool {
        self == Self::Timeout
    }
}

/// Weighted reward terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub term: f64,
    pub dist: f64,
    pub steer: f64,
    pub crash: f64,
    pub time: f64,
    pub total: f64,
}

/// Inputs for one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub prev_distance: f64,
    pub distance: f64,
    pub prev_steer: f64,
    pub steer: f64,
    pub speed: f64,
    pub collided: bool,
    pub terminal: Option<TerminalReason>,
}

pub fn compute_reward(o: &StepOutcome, w: &RewardWeights) -> RewardBreakdown {
    let term = match o.terminal {
        Some(TerminalReason::Success) => w.success,
        Some(_) => -w.failure,
        None => 0.0,
    };
    let dist = w.c1 * (o.prev_distance - o.distance);
    let steer = w.c2 * -((o.steer - o.prev_steer).abs() * o.speed.abs());
    let crash = w.c3 * if o.collided { -1.0 } else { 0.0 };
    let time = w.c4 * -1.0;
    RewardBreakdown {
        term,
        dist,
        steer,
        crash,
        time,
        total: term + dist + steer + crash + time,
    }
}

/// Planar distance within `radius`, inclusive.
pub fn success_check(position: [f64; 2], goal: [f64; 2], radius: f64) -> bool {
    (position[0] - goal[0]).hypot(position[1] - goal[1]) <= radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub success_radius: f64,
    pub max_steps: usize,
    /// The episode fails once collisions exceed this count.
    pub max_collisions: usize,
    pub personal_space: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            success_radius: 0.5,
            max_steps: 3000,
            max_collisions: 3,
            personal_space: 0.5,
        }
    }
}

/// Terminal reason after a step, checked in priority order: success,
/// leaving the walkable region, collision limit, timeout.
pub fn terminal_reason(distance: f64, inside_walkable: bool, collisions: usize, steps: usize, l: &Limits) -> Option<TerminalReason> {
    if distance <= l.success_radius {
        Some(TerminalReason::Success)
    } else if !inside_walkable {
        Some(TerminalReason::OutOfWalkable)
    } else if collisions > l.max_collisions {
        Some(TerminalReason::CollisionLimit)
    } else if steps >= l.max_steps {
        Some(TerminalReason::Timeout)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome() -> StepOutcome {
        StepOutcome {
            prev_distance: 5.0,
            distance: 5.0,
            prev_steer: 0.0,
            steer: 0.0,
            speed: 0.0,
            collided: false,
            terminal: None,
        }
    }

    #[test]
    fn approach_half_meter() {
        let r = compute_reward(
            &StepOutcome {
                distance: 4.5,
                ..outcome()
            },
            &RewardWeights::default(),
        );
        assert!((r.total - 0.4).abs() < 1e-12);
    }

    #[test]
    fn stationary_costs_time_only() {
        let r = compute_reward(&outcome(), &RewardWeights::default());
        assert!((r.total + 0.1).abs() < 1e-12);
    }

    #[test]
    fn crash_and_terminal_terms() {
        let w = RewardWeights::default();
        let r = compute_reward(
            &StepOutcome {
                collided: true,
                ..outcome()
            },
            &w,
        );
        assert_eq!(r.crash, -1.0);
        let r = compute_reward(
            &StepOutcome {
                terminal: Some(TerminalReason::Success),
                ..outcome()
            },
            &w,
        );
        assert_eq!(r.term, 10.0);
        let r = compute_reward(
            &StepOutcome {
                terminal: Some(TerminalReason::Timeout),
                ..outcome()
            },
            &w,
        );
        assert_eq!(r.term, -10.0);
    }

    #[test]
    fn steer_change_is_penalized_by_speed() {
        let r = compute_reward(
            &StepOutcome {
                steer: 0.5,
                speed: 1.0,
                ..outcome()
            },
            &RewardWeights::default(),
        );
        assert!((r.steer + 0.025).abs() < 1e-12);
    }

    #[test]
    fn success_boundary_is_inclusive() {
        assert!(success_check([0.49, 0.0], [0.0, 0.0], 0.5));
        assert!(success_check([0.5, 0.0], [0.0, 0.0], 0.5));
        assert!(!success_check([0.51, 0.0], [0.0, 0.0], 0.5));
    }

    #[test]
    fn terminal_priority() {
        let l = Limits::default();
        assert_eq!(terminal_reason(0.1, false, 9, 5000, &l), Some(TerminalReason::Success));
        assert_eq!(terminal_reason(3.0, false, 9, 5000, &l), Some(TerminalReason::OutOfWalkable));
        assert_eq!(terminal_reason(3.0, true, 4, 5000, &l), Some(TerminalReason::CollisionLimit));
        assert_eq!(terminal_reason(3.0, true, 3, 3000, &l), Some(TerminalReason::Timeout));
        assert_eq!(terminal_reason(3.0, true, 3, 2999, &l), None);
    }
}
