//! Splat optimization: objective, Adam, densification and the training loop.

pub mod adam;
pub mod densify;
pub mod objective;
pub mod train;

pub use adam::{AdamConfig, AdamState, LearningRates};
pub use densify::{densify_and_prune, DensifyConfig, DensifyOutcome, GradStats};
pub use objective::{loss_and_grad, loss_value, Evaluation, FrameTargets, LossConfig};
pub use train::{evaluate_views, init_from_points, random_init, train, TrainConfig, TrainReport, ViewMetrics};
