use ndarray::Array1;
use rand::Rng;

use crate::agent::dqapg::{adam, bootstrap_target, lambda_scale, min_q_of_policy, policy_net, q_net, regress};
use crate::agent::{policy_update, BatchArrays, ObsEncoder, StepMetrics, TrainConfig};
use crate::data::{sample_batch, OfflineDataset};
use crate::error::{Error, Result};
use crate::nn::{Mlp, OptimizerState};

/// Policy and clipped double-Q critics with their targets.
#[derive(Clone, Debug)]
pub struct Td3BcNets {
    pub policy: Mlp,
    pub q: [Mlp; 2],
    pub q_target: [Mlp; 2],
    pub policy_opt: OptimizerState,
    pub q_opt: [OptimizerState; 2],
}

impl Td3BcNets {
    pub fn new(cfg: &TrainConfig, action_bound: f64) -> Result<Self> {
        cfg.validate()?;
        let policy = policy_net(cfg, action_bound)?;
        let q = [q_net(cfg, 1)?, q_net(cfg, 2)?];
        let opt = adam(cfg);
        Ok(Self {
            policy_opt: OptimizerState::new(&policy, opt),
            q_opt: [OptimizerState::new(&q[0], opt), OptimizerState::new(&q[1], opt)],
            q_target: q.clone(),
            policy,
            q,
        })
    }

    pub fn named(&self) -> Vec<(&'static str, &Mlp)> {
        vec![
            ("policy", &self.policy),
            ("q1", &self.q[0]),
            ("q2", &self.q[1]),
            ("q1_target", &self.q_target[0]),
            ("q2_target", &self.q_target[1]),
        ]
    }
}

/// `r + (1 - d) * min_i Q_tar_i(s', g, pi(s', g))`, clamped to `[-H, 0]`.
pub fn td3bc_q_targets(batch: &BatchArrays, nets: &Td3BcNets, cfg: &TrainConfig) -> Result<Array1<f64>> {
    let boot = min_q_of_policy(&nets.q_target, &nets.policy, batch.next_obs.view(), batch.action_bound)?;
    if !boot.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Q target networks"));
    }
    Ok(bootstrap_target(batch, &boot, cfg.horizon))
}

/// Critic regression followed by an unweighted behaviour cloning plus
/// lambda-scaled Q maximisation policy step.
pub fn td3bc_update(step_index: usize, batch: &BatchArrays, nets: &mut Td3BcNets, cfg: &TrainConfig) -> Result<StepMetrics> {
    let y = td3bc_q_targets(batch, nets, cfg)?;
    let q_in = crate::agent::critic_input(batch.obs.view(), batch.actions.view(), batch.action_bound);
    let mut loss_q = [0.0; 2];
    for i in 0..2 {
        loss_q[i] = regress(&mut nets.q[i], &mut nets.q_opt[i], q_in.view(), y.view())?;
    }
    let lambda = lambda_scale(batch, &nets.q[0])?;
    let ones = Array1::ones(batch.len());
    let loss_pi = policy_update(batch, &mut nets.policy, &mut nets.policy_opt, Some(&nets.q[0]), ones.view(), lambda)?;
    if step_index % cfg.target_update_every == 0 {
        for i in 0..2 {
            nets.q_target[i].blend_toward(&nets.q[i], cfg.rho)?;
        }
    }
    Ok(StepMetrics {
        step: step_index,
        loss_q: [Some(loss_q[0]), Some(loss_q[1])],
        loss_v: [None, None],
        loss_pi: Some(loss_pi),
        lambda: Some(lambda),
        mean_w: Some(1.0),
        w_range: Some((1.0, 1.0)),
        skipped: false,
    })
}

pub fn td3bc_step<R: Rng + ?Sized>(
    step_index: usize,
    dataset: &OfflineDataset,
    nets: &mut Td3BcNets,
    cfg: &TrainConfig,
    enc: &ObsEncoder,
    epsilon: f64,
    rng: &mut R,
) -> Result<StepMetrics> {
    let batch = sample_batch(dataset, &cfg.sampler(epsilon), rng)?;
    td3bc_update(step_index, &BatchArrays::new(&batch, enc), nets, cfg)
}
