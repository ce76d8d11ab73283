use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::{GradBundle, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step_count: u64,
    m_weights: Vec<Array2<f64>>,
    m_biases: Vec<Array1<f64>>,
    v_weights: Vec<Array2<f64>>,
    v_biases: Vec<Array1<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zw = || net.weights().iter().map(|w| Array2::zeros(w.dim())).collect();
        let zb = || net.biases().iter().map(|b| Array1::zeros(b.len())).collect();
        Self {
            config,
            step_count: 0,
            m_weights: zw(),
            m_biases: zb(),
            v_weights: zw(),
            v_biases: zb(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam update of `net` in place.
///
/// Non-finite gradients reject the update and leave both `net` and `opt`
/// untouched.
pub fn adam_step(net: &mut Mlp, grads: &GradBundle, opt: &mut OptimizerState) -> Result<()> {
    grads.check_congruent(net)?;
    if opt.m_weights.len() != net.weights().len()
        || opt.m_weights.iter().zip(net.weights()).any(|(m, w)| m.dim() != w.dim())
    {
        return Err(Error::shape(
            "adam_step",
            format!("{:?}", net.dims()),
            "optimizer state of another network",
        ));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("adam_step gradients"));
    }
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        eps,
    } = opt.config;
    opt.step_count += 1;
    let t = opt.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for l in 0..grads.weights.len() {
        Zip::from(&mut net.weights_mut()[l])
            .and(&mut opt.m_weights[l])
            .and(&mut opt.v_weights[l])
            .and(&grads.weights[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut net.biases_mut()[l])
            .and(&mut opt.m_biases[l])
            .and(&mut opt.v_biases[l])
            .and(&grads.biases[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}
