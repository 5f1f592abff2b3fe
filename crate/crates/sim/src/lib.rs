//! Navigation environment over a reconstructed scene: splats render the
//! agent's view, a triangle mesh handles collisions, and obstacles and
//! pedestrians are composited in with a z-buffer.

pub mod assets;
pub mod camera_rig;
pub mod collision;
pub mod demo;
pub mod dynamics;
pub mod env;
pub mod episode;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod policy;
pub mod polygon;
pub mod render;
pub mod reward;
pub mod scene;

pub use dynamics::{step_dynamics, Action, AgentState, BicycleParams};
pub use env::{Env, EnvOptions, Observation, StepResult};
pub use episode::{spawn_episode, EpisodeState, Task};
pub use error::{Result, SimError};
pub use metrics::{compute_metrics, EpisodeRecord, Metrics};
pub use policy::{rollout, OraclePolicy, Policy, RandomPolicy};
pub use reward::{compute_reward, RewardBreakdown, RewardWeights, TerminalReason};
pub use scene::{Scene, SceneConfig};
