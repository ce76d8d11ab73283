//! Central finite-difference checks of the analytic gradients.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{critic_input, policy_loss_and_grad, BatchArrays, ObsEncoder};
use crate::error::Result;
use crate::nn::{GradBundle, Mlp, OutputActivation};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Perturbs every analytic gradient before comparison. Used to confirm
    /// the checks can fail.
    pub corrupt: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            corrupt: false,
        }
    }
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `loss` with respect to the flattened parameters
/// of `net`.
pub fn numeric_gradient<F>(net: &Mlp, step: f64, mut loss: F) -> Result<Vec<f64>>
where
    F: FnMut(&Mlp) -> Result<f64>,
{
    let base = net.to_flat();
    let mut probe = net.clone();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        flat[i] = base[i] + step;
        probe.set_flat(&flat)?;
        let up = loss(&probe)?;
        flat[i] = base[i] - step;
        probe.set_flat(&flat)?;
        let down = loss(&probe)?;
        flat[i] = base[i];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

fn compare(name: &str, analytic: &GradBundle, numeric: &[f64], opts: &GradcheckOptions) -> CheckResult {
    let mut flat = analytic.to_flat();
    if opts.corrupt {
        flat.iter_mut().for_each(|g| *g = *g * 1.01 + 1e-3);
    }
    let err = relative_error(&flat, numeric);
    CheckResult {
        name: name.to_string(),
        num_params: flat.len(),
        max_rel_error: err,
        tolerance: opts.tolerance,
        passed: err <= opts.tolerance,
    }
}

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Half squared norm of the outputs against fixed targets.
fn squared_error_check(name: &str, net: &Mlp, x: &Array2<f64>, target: &Array2<f64>, opts: &GradcheckOptions) -> Result<CheckResult> {
    let loss = |n: &Mlp| -> Result<f64> {
        let y = n.forward_batch(x.view())?;
        Ok(0.5 * (&y - target).mapv(|d| d * d).sum())
    };
    let tape = net.forward_tape(x.view())?;
    let grad = tape.output() - target;
    let analytic = net.backward(&tape, grad.view())?;
    let numeric = numeric_gradient(net, opts.step, loss)?;
    Ok(compare(name, &analytic, &numeric, opts))
}

/// A random batch in encoded coordinates for the policy-loss check.
pub fn random_batch(rows: usize, action_bound: f64, rng: &mut ChaCha8Rng) -> BatchArrays {
    let actions = uniform(rows, ObsEncoder::ACTION_DIM, rng) * action_bound;
    BatchArrays {
        obs: uniform(rows, ObsEncoder::OBS_DIM, rng),
        next_obs: uniform(rows, ObsEncoder::OBS_DIM, rng),
        actions,
        rewards: Array1::from_shape_fn(rows, |_| -f64::from(rng.random_range(0..2u8))),
        not_done: Array1::ones(rows),
        action_bound,
    }
}

/// Runs all checks.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();

    let net = Mlp::new(&[2, 16, 1], OutputActivation::Identity, opts.seed)?;
    let x = uniform(8, 2, &mut rng);
    let t = uniform(8, 1, &mut rng);
    checks.push(squared_error_check("mlp 2-16-1 identity", &net, &x, &t, opts)?);

    let net = Mlp::new(&[3, 16, 16, 2], OutputActivation::TanhScaled(2.0), opts.seed + 1)?;
    let x = uniform(8, 3, &mut rng);
    let t = uniform(8, 2, &mut rng);
    checks.push(squared_error_check("mlp 3-16-16-2 tanh", &net, &x, &t, opts)?);

    let bound = 2.0;
    let batch = random_batch(16, bound, &mut rng);
    let q_dims = [ObsEncoder::OBS_DIM + ObsEncoder::ACTION_DIM, 16, 1];
    let q1 = Mlp::new(&q_dims, OutputActivation::Identity, opts.seed + 2)?;
    let q_in = critic_input(batch.obs.view(), batch.actions.view(), bound);
    let y = batch.rewards.clone().insert_axis(Axis(1));
    checks.push(squared_error_check("critic regression", &q1, &q_in, &y, opts)?);

    let policy = Mlp::new(
        &[ObsEncoder::OBS_DIM, 8, ObsEncoder::ACTION_DIM],
        OutputActivation::TanhScaled(bound),
        opts.seed + 3,
    )?;
    let weights = Array1::from_shape_fn(batch.len(), |_| rng.random_range(0.1..3.0));
    let lambda = 0.7;
    let (_, analytic) = policy_loss_and_grad(&batch, &policy, Some(&q1), weights.view(), lambda)?;
    let numeric = numeric_gradient(&policy, opts.step, |p| {
        policy_loss_and_grad(&batch, p, Some(&q1), weights.view(), lambda).map(|(l, _)| l)
    })?;
    checks.push(compare("dqapg policy loss", &analytic, &numeric, opts));

    Ok(GradcheckReport { checks })
}
