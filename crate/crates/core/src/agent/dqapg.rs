//! Deterministic Q-advantage policy gradient.
//!
//! Twin Q and twin V critics are trained by TD regression on clamped
//! targets. The policy minimises an advantage-weighted behaviour cloning
//! loss minus a batch-normalised deterministic policy gradient term:
//!
//! ```text
//! L(psi) = mean_i [ w_i * mse(pi(s_i, g_i), a_i) - lambda * Q1(s_i, g_i, pi(s_i, g_i)) ]
//! w_i    = min(exp(Q1(s_i, g_i, a_i) - V1(s_i, g_i)), adv_clip)
//! lambda = 1 / mean_i |Q1(s_i, g_i, a_i)|
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::batch::{critic_input, BatchArrays, ObsEncoder};
use super::config::{TrainConfig, VTargetMode};
use super::StepMetrics;
use crate::data::{sample_batch, OfflineDataset};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, GradBundle, Mlp, OptimizerState, OutputActivation};

/// Mean |Q| below which lambda falls back to 1.
const LAMBDA_GUARD: f64 = 1e-8;

/// Policy, twin Q and twin V networks, their targets and optimizers.
#[derive(Clone, Debug)]
pub struct AgentNets {
    pub policy: Mlp,
    pub q: [Mlp; 2],
    pub v: [Mlp; 2],
    pub q_target: [Mlp; 2],
    pub v_target: [Mlp; 2],
    pub policy_opt: OptimizerState,
    pub q_opt: [OptimizerState; 2],
    pub v_opt: [OptimizerState; 2],
}

pub(crate) fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}

pub(crate) fn policy_net(cfg: &TrainConfig, action_bound: f64) -> Result<Mlp> {
    Mlp::new(
        &layer_dims(ObsEncoder::OBS_DIM, &cfg.hidden, ObsEncoder::ACTION_DIM),
        OutputActivation::TanhScaled(action_bound),
        cfg.net_seed(0),
    )
}

pub(crate) fn q_net(cfg: &TrainConfig, k: u64) -> Result<Mlp> {
    Mlp::new(
        &layer_dims(ObsEncoder::OBS_DIM + ObsEncoder::ACTION_DIM, &cfg.hidden, 1),
        OutputActivation::Identity,
        cfg.net_seed(k),
    )
}

pub(crate) fn adam(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    }
}

impl AgentNets {
    pub fn new(cfg: &TrainConfig, action_bound: f64) -> Result<Self> {
        cfg.validate()?;
        let policy = policy_net(cfg, action_bound)?;
        let q = [q_net(cfg, 1)?, q_net(cfg, 2)?];
        let v_dims = layer_dims(ObsEncoder::OBS_DIM, &cfg.hidden, 1);
        let v = [
            Mlp::new(&v_dims, OutputActivation::Identity, cfg.net_seed(3))?,
            Mlp::new(&v_dims, OutputActivation::Identity, cfg.net_seed(4))?,
        ];
        let opt = adam(cfg);
        Ok(Self {
            policy_opt: OptimizerState::new(&policy, opt),
            q_opt: [OptimizerState::new(&q[0], opt), OptimizerState::new(&q[1], opt)],
            v_opt: [OptimizerState::new(&v[0], opt), OptimizerState::new(&v[1], opt)],
            q_target: q.clone(),
            v_target: v.clone(),
            policy,
            q,
            v,
        })
    }

    /// Moves all four critic targets toward their online networks.
    pub fn update_targets(&mut self, rho: f64) -> Result<()> {
        for i in 0..2 {
            self.q_target[i].blend_toward(&self.q[i], rho)?;
            self.v_target[i].blend_toward(&self.v[i], rho)?;
        }
        Ok(())
    }

    /// `(name, network)` pairs in checkpoint order.
    pub fn named(&self) -> Vec<(&'static str, &Mlp)> {
        vec![
            ("policy", &self.policy),
            ("q1", &self.q[0]),
            ("q2", &self.q[1]),
            ("v1", &self.v[0]),
            ("v2", &self.v[1]),
            ("q1_target", &self.q_target[0]),
            ("q2_target", &self.q_target[1]),
            ("v1_target", &self.v_target[0]),
            ("v2_target", &self.v_target[1]),
        ]
    }
}

pub(crate) fn column(out: Array2<f64>) -> Array1<f64> {
    out.index_axis_move(Axis(1), 0)
}

fn ensure_finite(v: &Array1<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `r + (1 - d) * bootstrap`, clamped to `[-horizon, 0]`.
pub(crate) fn bootstrap_target(batch: &BatchArrays, bootstrap: &Array1<f64>, horizon: usize) -> Array1<f64> {
    let h = horizon as f64;
    let mut y = Array1::zeros(batch.len());
    Zip::from(&mut y)
        .and(&batch.rewards)
        .and(&batch.not_done)
        .and(bootstrap)
        .for_each(|y, &r, &m, &b| *y = (r + m * b).clamp(-h, 0.0));
    y
}

fn elementwise_min(a: Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let mut a = a;
    Zip::from(&mut a).and(b).for_each(|x, &y| *x = x.min(y));
    a
}

/// Clipped double-Q evaluation of the current policy at `obs`.
pub(crate) fn min_q_of_policy(q: &[Mlp; 2], policy: &Mlp, obs: ArrayView2<f64>, bound: f64) -> Result<Array1<f64>> {
    let actions = policy.forward_batch(obs)?;
    let input = critic_input(obs, actions.view(), bound);
    let q1 = column(q[0].forward_batch(input.view())?);
    let q2 = column(q[1].forward_batch(input.view())?);
    Ok(elementwise_min(q1, &q2))
}

/// Q regression targets `r + (1 - d) * min_i V_tar_i(s', g)`, clamped.
pub fn q_targets(batch: &BatchArrays, nets: &AgentNets, cfg: &TrainConfig) -> Result<Array1<f64>> {
    let v1 = column(nets.v_target[0].forward_batch(batch.next_obs.view())?);
    let v2 = column(nets.v_target[1].forward_batch(batch.next_obs.view())?);
    let boot = elementwise_min(v1, &v2);
    ensure_finite(&boot, "V target networks")?;
    Ok(bootstrap_target(batch, &boot, cfg.horizon))
}

/// V regression targets; see [`VTargetMode`].
pub fn v_targets(batch: &BatchArrays, nets: &AgentNets, cfg: &TrainConfig) -> Result<Array1<f64>> {
    match cfg.v_target_mode {
        VTargetMode::NextState => {
            let boot = min_q_of_policy(&nets.q_target, &nets.policy, batch.next_obs.view(), batch.action_bound)?;
            ensure_finite(&boot, "Q target networks")?;
            Ok(bootstrap_target(batch, &boot, cfg.horizon))
        }
        VTargetMode::SameState => {
            let q = min_q_of_policy(&nets.q, &nets.policy, batch.obs.view(), batch.action_bound)?;
            ensure_finite(&q, "Q networks")?;
            let h = cfg.horizon as f64;
            Ok(q.mapv(|v| v.clamp(-h, 0.0)))
        }
    }
}

/// One Adam step of `net` on `mean((net(x) - y)^2)`. Returns the loss
/// before the step.
pub(crate) fn regress(net: &mut Mlp, opt: &mut OptimizerState, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let tape = net.forward_tape(x)?;
    let n = y.len() as f64;
    let residual = &tape.output().column(0) - &y;
    let loss = residual.mapv(|r| r * r).sum() / n;
    let grad = (residual * (2.0 / n)).insert_axis(Axis(1));
    let grads = net.backward(&tape, grad.view())?;
    adam_step(net, &grads, opt)?;
    Ok(loss)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticLosses {
    pub q: [f64; 2],
    pub v: [f64; 2],
}

/// Q step against V-target bootstraps, then V step against the V targets.
pub fn critic_update(batch: &BatchArrays, nets: &mut AgentNets, cfg: &TrainConfig) -> Result<CriticLosses> {
    let y_q = q_targets(batch, nets, cfg)?;
    let q_in = critic_input(batch.obs.view(), batch.actions.view(), batch.action_bound);
    let mut q = [0.0; 2];
    for i in 0..2 {
        q[i] = regress(&mut nets.q[i], &mut nets.q_opt[i], q_in.view(), y_q.view())?;
    }
    let y_v = v_targets(batch, nets, cfg)?;
    let mut v = [0.0; 2];
    for i in 0..2 {
        v[i] = regress(&mut nets.v[i], &mut nets.v_opt[i], batch.obs.view(), y_v.view())?;
    }
    Ok(CriticLosses { q, v })
}

/// `Q1(s, g, a)` on the batch's dataset actions.
pub(crate) fn q1_on_data(q1: &Mlp, batch: &BatchArrays) -> Result<Array1<f64>> {
    let q_in = critic_input(batch.obs.view(), batch.actions.view(), batch.action_bound);
    let q = column(q1.forward_batch(q_in.view())?);
    ensure_finite(&q, "Q1")?;
    Ok(q)
}

/// `min(exp(A), clip)` without overflowing: the exponent is capped at
/// `ln(clip) + 1` first.
pub fn clip_advantage_weight(advantage: f64, clip: f64) -> f64 {
    let cap = clip.ln() + 1.0;
    advantage.min(cap).exp().min(clip)
}

/// Per-row clipped advantage weights from `Q1` and `V1`.
pub fn advantage_weights(batch: &BatchArrays, nets: &AgentNets, cfg: &TrainConfig) -> Result<Array1<f64>> {
    let q = q1_on_data(&nets.q[0], batch)?;
    let v = column(nets.v[0].forward_batch(batch.obs.view())?);
    ensure_finite(&v, "V1")?;
    Ok((q - v).mapv(|a| clip_advantage_weight(a, cfg.adv_clip)))
}

/// `1 / mean |q|`, or 1 when the mean is below [`LAMBDA_GUARD`].
pub fn lambda_from_q(q: ArrayView1<f64>) -> f64 {
    let mean_abs = q.iter().map(|v| v.abs()).sum::<f64>() / q.len().max(1) as f64;
    if mean_abs < LAMBDA_GUARD {
        1.0
    } else {
        1.0 / mean_abs
    }
}

/// Batch lambda from `Q1` on dataset actions.
pub fn lambda_scale(batch: &BatchArrays, q1: &Mlp) -> Result<f64> {
    Ok(lambda_from_q(q1_on_data(q1, batch)?.view()))
}

/// Value and parameter gradient of the policy loss with frozen weights
/// and lambda. The critic only provides `dQ/da`; without one the loss is
/// weighted behaviour cloning alone.
pub fn policy_loss_and_grad(
    batch: &BatchArrays,
    policy: &Mlp,
    q1: Option<&Mlp>,
    weights: ArrayView1<f64>,
    lambda: f64,
) -> Result<(f64, GradBundle)> {
    let b = batch.len();
    if weights.len() != b {
        return Err(Error::shape("policy_loss_and_grad", b, weights.len()));
    }
    let n = b as f64;
    let adim = ObsEncoder::ACTION_DIM as f64;
    let tape = policy.forward_tape(batch.obs.view())?;
    let actions = tape.output();

    let diff = actions - &batch.actions;
    let row_mse = diff.mapv(|d| d * d).sum_axis(Axis(1)) / adim;
    let bc = (&row_mse * &weights).sum() / n;
    let mut grad = diff * (2.0 / (adim * n));
    grad *= &weights.insert_axis(Axis(1));

    let mut q_term = 0.0;
    if let Some(q1) = q1.filter(|_| lambda != 0.0) {
        let q_in = critic_input(batch.obs.view(), actions.view(), batch.action_bound);
        let q_tape = q1.forward_tape(q_in.view())?;
        q_term = q_tape.output().sum() / n;
        let seed = Array2::from_elem((b, 1), -lambda / n);
        let dq = q1.backward(&q_tape, seed.view())?;
        let da = dq.input.slice(s![.., ObsEncoder::OBS_DIM..]).mapv(|g| g / batch.action_bound);
        grad += &da;
    }
    let loss = bc - lambda * q_term;
    if !loss.is_finite() {
        return Err(Error::NonFinite("policy loss"));
    }
    Ok((loss, policy.backward(&tape, grad.view())?))
}

/// One Adam step on the policy loss. Critic parameters are read only.
pub fn policy_update(
    batch: &BatchArrays,
    policy: &mut Mlp,
    policy_opt: &mut OptimizerState,
    q1: Option<&Mlp>,
    weights: ArrayView1<f64>,
    lambda: f64,
) -> Result<f64> {
    let (loss, grads) = policy_loss_and_grad(batch, policy, q1, weights, lambda)?;
    adam_step(policy, &grads, policy_opt)?;
    Ok(loss)
}

/// Critic step, then policy step, then a target refresh when `step_index`
/// is a multiple of `target_update_every`. Steps are numbered from 1.
pub fn dqapg_update(step_index: usize, batch: &BatchArrays, nets: &mut AgentNets, cfg: &TrainConfig) -> Result<StepMetrics> {
    let losses = critic_update(batch, nets, cfg)?;
    let weights = advantage_weights(batch, nets, cfg)?;
    let lambda = lambda_scale(batch, &nets.q[0])?;
    let loss_pi = policy_update(batch, &mut nets.policy, &mut nets.policy_opt, Some(&nets.q[0]), weights.view(), lambda)?;
    if step_index % cfg.target_update_every == 0 {
        nets.update_targets(cfg.rho)?;
    }
    Ok(StepMetrics {
        step: step_index,
        loss_q: [Some(losses.q[0]), Some(losses.q[1])],
        loss_v: [Some(losses.v[0]), Some(losses.v[1])],
        loss_pi: Some(loss_pi),
        lambda: Some(lambda),
        mean_w: weights.mean(),
        w_range: Some(weights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)))),
        skipped: false,
    })
}

/// Samples a batch and applies [`dqapg_update`].
pub fn train_step<R: Rng + ?Sized>(
    step_index: usize,
    dataset: &OfflineDataset,
    nets: &mut AgentNets,
    cfg: &TrainConfig,
    enc: &ObsEncoder,
    epsilon: f64,
    rng: &mut R,
) -> Result<StepMetrics> {
    let batch = sample_batch(dataset, &cfg.sampler(epsilon), rng)?;
    dqapg_update(step_index, &BatchArrays::new(&batch, enc), nets, cfg)
}
