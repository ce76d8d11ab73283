//! Comparison learners sharing the DQAPG data path: a TD3+BC style
//! learner and goal-conditioned supervised learning.

mod gcsl;
mod td3bc;

pub use gcsl::{gcsl_step, gcsl_update, GcslNets};
pub use td3bc::{td3bc_q_targets, td3bc_step, td3bc_update, Td3BcNets};
