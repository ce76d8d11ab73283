//! The DQAPG learner and the pieces shared with the baselines.

mod batch;
mod config;
pub mod dqapg;

pub use batch::{critic_input, BatchArrays, ObsEncoder};
pub use config::{Algorithm, TrainConfig, VTargetMode};
pub use dqapg::{
    advantage_weights, clip_advantage_weight, critic_update, dqapg_update, lambda_from_q, lambda_scale, policy_loss_and_grad,
    policy_update, q_targets, train_step, v_targets, AgentNets, CriticLosses,
};

/// Per-step training diagnostics. `None` marks a quantity the algorithm
/// does not have.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub loss_q: [Option<f64>; 2],
    pub loss_v: [Option<f64>; 2],
    pub loss_pi: Option<f64>,
    pub lambda: Option<f64>,
    pub mean_w: Option<f64>,
    /// Smallest and largest advantage weight of the batch.
    pub w_range: Option<(f64, f64)>,
    pub skipped: bool,
}

impl StepMetrics {
    pub fn skipped(step: usize) -> Self {
        Self {
            step,
            loss_q: [None, None],
            loss_v: [None, None],
            loss_pi: None,
            lambda: None,
            mean_w: None,
            w_range: None,
            skipped: true,
        }
    }

    pub const CSV_HEADER: &'static str = "step,loss_q1,loss_q2,loss_v1,loss_v2,loss_pi,lambda,mean_w";

    /// One CSV row; absent values are left empty.
    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            f(self.loss_q[0]),
            f(self.loss_q[1]),
            f(self.loss_v[0]),
            f(self.loss_v[1]),
            f(self.loss_pi),
            f(self.lambda),
            f(self.mean_w)
        )
    }
}
