use serde::{Deserialize, Serialize};

use crate::data::{GoalSource, SamplerConfig};
use crate::error::{Error, Result};

/// Learner selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dqapg,
    Td3bc,
    Gcsl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqapg => "dqapg",
            Algorithm::Td3bc => "td3bc",
            Algorithm::Gcsl => "gcsl",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqapg" => Ok(Algorithm::Dqapg),
            "td3bc" => Ok(Algorithm::Td3bc),
            "gcsl" => Ok(Algorithm::Gcsl),
            other => Err(Error::Config(format!("unknown algorithm {other:?} (dqapg, td3bc, gcsl)"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bootstrapping target for the V networks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VTargetMode {
    /// `r + (1 - d) * min_i Q_tar_i(s', g, pi(s', g))`.
    #[default]
    NextState,
    /// `min_i Q_i(s, g, pi(s, g))`, no reward term.
    SameState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Always 1: values count remaining steps to the goal.
    pub gamma: f64,
    /// Values and targets are constrained to `[-horizon, 0]`.
    pub horizon: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Polyak weight kept on the target parameters.
    pub rho: f64,
    pub target_update_every: usize,
    pub her_ratio: f64,
    pub swap_enabled: bool,
    pub goal_source: GoalSource,
    pub adv_clip: f64,
    pub total_steps: usize,
    pub seed: u64,
    pub v_target_mode: VTargetMode,
    /// Hidden layer widths shared by every network.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            horizon: 60,
            batch_size: 512,
            learning_rate: 1e-3,
            rho: 0.95,
            target_update_every: 10,
            her_ratio: 0.5,
            swap_enabled: true,
            goal_source: GoalSource::TaskGoal,
            adv_clip: 100.0,
            total_steps: 20_000,
            seed: 0,
            v_target_mode: VTargetMode::NextState,
            hidden: vec![256, 256, 256],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.gamma != 1.0 {
            return fail(format!("gamma is fixed at 1, got {}", self.gamma));
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return fail(format!("batch_size must be positive and even, got {}", self.batch_size));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.target_update_every == 0 {
            return fail("target_update_every must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.her_ratio) {
            return fail(format!("her_ratio must lie in [0, 1], got {}", self.her_ratio));
        }
        if !(self.adv_clip > 0.0) {
            return fail(format!("adv_clip must be positive, got {}", self.adv_clip));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        Ok(())
    }

    pub fn sampler(&self, epsilon: f64) -> SamplerConfig {
        SamplerConfig {
            batch_size: self.batch_size,
            her_ratio: self.her_ratio,
            swap_enabled: self.swap_enabled,
            goal_source: self.goal_source,
            epsilon,
        }
    }

    /// Seed for the `k`-th network of a run.
    pub(crate) fn net_seed(&self, k: u64) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k + 1)
    }
}
