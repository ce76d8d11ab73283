//! Continuous 2D point maze with a grid A* expert.

mod env;
mod expert;
mod spec;

pub use env::{apply_motion, clip_action, reset, step, Cluster, EnvState, StepOutcome};
pub use expert::{astar, expert_action, planned_action};
pub use spec::{distance, sparse_reward, MazeSpec, Vec2, DEFAULT_LAYOUT};
