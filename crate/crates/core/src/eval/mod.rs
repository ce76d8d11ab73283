//! Greedy policy evaluation and significance testing.

mod rollout;
mod stats;

pub use rollout::{
    evaluate, evaluate_snapshot, run_episode, run_episodes, Episode, EvalConfig, EvalMode, EvalReport, GoalPolicy,
    NetworkPolicy, TraceRow,
};
pub use stats::{
    ln_gamma, regularized_incomplete_beta, t_test, t_two_sided_p, welch_t_test, ComparisonResult, VarianceModel, ALPHA,
};
