use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::MiniBatch;
use crate::maze::{MazeSpec, Vec2};

/// Maps raw maze coordinates and actions onto network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsEncoder {
    pub center: Vec2,
    pub half_extent: Vec2,
    pub action_bound: f64,
}

impl ObsEncoder {
    pub fn new(spec: &MazeSpec) -> Self {
        let hx = (spec.width as f64 - 1.0) / 2.0;
        let hy = (spec.height as f64 - 1.0) / 2.0;
        Self {
            center: [hx, hy],
            half_extent: [hx, hy],
            action_bound: spec.action_bound,
        }
    }

    /// `state ++ goal`, each normalised to roughly `[-1, 1]`.
    pub fn encode(&self, state: Vec2, goal: Vec2) -> [f64; 4] {
        let n = |p: Vec2| {
            [
                (p[0] - self.center[0]) / self.half_extent[0],
                (p[1] - self.center[1]) / self.half_extent[1],
            ]
        };
        let (s, g) = (n(state), n(goal));
        [s[0], s[1], g[0], g[1]]
    }

    pub const OBS_DIM: usize = 4;
    pub const ACTION_DIM: usize = 2;
}

/// Column-major view of a minibatch ready for the networks.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchArrays {
    /// Encoded `(s, g)`, `(B, 4)`.
    pub obs: Array2<f64>,
    /// Encoded `(s', g)`, `(B, 4)`.
    pub next_obs: Array2<f64>,
    /// Raw dataset actions, `(B, 2)`.
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    /// `1 - d`.
    pub not_done: Array1<f64>,
    pub action_bound: f64,
}

impl BatchArrays {
    pub fn new(batch: &MiniBatch, enc: &ObsEncoder) -> Self {
        let b = batch.len();
        let mut obs = Array2::zeros((b, ObsEncoder::OBS_DIM));
        let mut next_obs = Array2::zeros((b, ObsEncoder::OBS_DIM));
        let mut actions = Array2::zeros((b, ObsEncoder::ACTION_DIM));
        let mut rewards = Array1::zeros(b);
        let mut not_done = Array1::zeros(b);
        for (i, t) in batch.rows.iter().enumerate() {
            for (j, v) in enc.encode(t.state, t.goal).into_iter().enumerate() {
                obs[[i, j]] = v;
            }
            for (j, v) in enc.encode(t.next_state, t.goal).into_iter().enumerate() {
                next_obs[[i, j]] = v;
            }
            actions[[i, 0]] = t.action[0];
            actions[[i, 1]] = t.action[1];
            rewards[i] = t.reward;
            not_done[i] = if t.done { 0.0 } else { 1.0 };
        }
        Self {
            obs,
            next_obs,
            actions,
            rewards,
            not_done,
            action_bound: enc.action_bound,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Critic input `obs ++ action / bound`.
pub fn critic_input(obs: ArrayView2<f64>, actions: ArrayView2<f64>, bound: f64) -> Array2<f64> {
    let scaled = actions.mapv(|a| a / bound);
    concatenate(Axis(1), &[obs, scaled.view()]).expect("batch sizes agree")
}
