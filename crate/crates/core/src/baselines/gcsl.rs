use ndarray::Array1;
use rand::Rng;

use crate::agent::dqapg::{adam, policy_net};
use crate::agent::{policy_update, BatchArrays, ObsEncoder, StepMetrics, TrainConfig};
use crate::data::{sample_batch, AugTag, MiniBatch, OfflineDataset};
use crate::error::Result;
use crate::nn::{Mlp, OptimizerState};

/// Goal-conditioned supervised learning: a policy network only.
#[derive(Clone, Debug)]
pub struct GcslNets {
    pub policy: Mlp,
    pub policy_opt: OptimizerState,
}

impl GcslNets {
    pub fn new(cfg: &TrainConfig, action_bound: f64) -> Result<Self> {
        cfg.validate()?;
        let policy = policy_net(cfg, action_bound)?;
        Ok(Self {
            policy_opt: OptimizerState::new(&policy, adam(cfg)),
            policy,
        })
    }

    pub fn named(&self) -> Vec<(&'static str, &Mlp)> {
        vec![("policy", &self.policy)]
    }
}

/// Behaviour cloning on the hindsight-relabelled rows of `batch`. Rewards
/// are never read. Returns a skipped metric row when no row was relabelled.
pub fn gcsl_update(step_index: usize, batch: &MiniBatch, nets: &mut GcslNets, enc: &ObsEncoder) -> Result<StepMetrics> {
    let relabelled = batch.filter(AugTag::Hindsight);
    if relabelled.is_empty() {
        log::warn!("step {step_index}: no hindsight rows in batch, GCSL update skipped");
        return Ok(StepMetrics::skipped(step_index));
    }
    let arrays = BatchArrays::new(&relabelled, enc);
    let ones = Array1::ones(arrays.len());
    let loss = policy_update(&arrays, &mut nets.policy, &mut nets.policy_opt, None, ones.view(), 0.0)?;
    Ok(StepMetrics {
        step: step_index,
        loss_q: [None, None],
        loss_v: [None, None],
        loss_pi: Some(loss),
        lambda: None,
        mean_w: None,
        w_range: None,
        skipped: false,
    })
}

pub fn gcsl_step<R: Rng + ?Sized>(
    step_index: usize,
    dataset: &OfflineDataset,
    nets: &mut GcslNets,
    cfg: &TrainConfig,
    enc: &ObsEncoder,
    epsilon: f64,
    rng: &mut R,
) -> Result<StepMetrics> {
    let batch = sample_batch(dataset, &cfg.sampler(epsilon), rng)?;
    gcsl_update(step_index, &batch, nets, enc)
}
