//! Offline goal-conditioned reinforcement learning on a continuous point
//! maze: goal-swapping data augmentation, the deterministic Q-advantage
//! policy gradient learner, two baselines, and an evaluation harness.

pub mod agent;
pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod maze;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
