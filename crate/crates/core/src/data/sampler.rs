use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{OfflineDataset, Trajectory};
use super::transition::{swap_goal, Transition};
use crate::error::{Error, Result};
use crate::maze::Vec2;

/// How a minibatch row was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugTag {
    Original,
    Hindsight,
    Swapped,
}

/// Where swapped goals are drawn from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    /// Task goal of a uniformly random trajectory.
    #[default]
    TaskGoal,
    /// Achieved goal of a uniformly random stored transition.
    AchievedGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub her_ratio: f64,
    pub swap_enabled: bool,
    pub goal_source: GoalSource,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MiniBatch {
    pub rows: Vec<Transition>,
    pub tags: Vec<AugTag>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, tag: AugTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }

    /// Rows carrying `tag`, as a new batch.
    pub fn filter(&self, tag: AugTag) -> MiniBatch {
        let (rows, tags) = self
            .rows
            .iter()
            .zip(&self.tags)
            .filter(|(_, &t)| t == tag)
            .map(|(r, &t)| (*r, t))
            .unzip();
        MiniBatch { rows, tags }
    }
}

/// Relabels step `t` with the goal achieved after a uniformly chosen step
/// `i` in `[t, len - 1]`. `i == t` relabels with `next_achieved` of step
/// `t` itself and therefore always yields a success.
pub fn relabel_hindsight<R: Rng + ?Sized>(traj: &Trajectory, t: usize, epsilon: f64, rng: &mut R) -> Transition {
    let i = rng.random_range(t..traj.steps.len());
    traj.steps[t].with_goal(traj.steps[i].next_achieved, epsilon)
}

fn random_goal<R: Rng + ?Sized>(dataset: &OfflineDataset, source: GoalSource, rng: &mut R) -> Vec2 {
    match source {
        GoalSource::TaskGoal => {
            let trajs = dataset.trajectories();
            trajs[rng.random_range(0..trajs.len())].task_goal
        }
        GoalSource::AchievedGoal => {
            dataset.transition(rng.random_range(0..dataset.num_transitions())).next_achieved
        }
    }
}

/// Draws `batch_size` transitions uniformly over all stored steps.
///
/// With swapping enabled, exactly half of the rows (a uniform subset) get a
/// random goal from the dataset. Every other row is hindsight-relabelled
/// with probability `her_ratio`, so the two tags never overlap.
pub fn sample_batch<R: Rng + ?Sized>(dataset: &OfflineDataset, cfg: &SamplerConfig, rng: &mut R) -> Result<MiniBatch> {
    let b = cfg.batch_size;
    if b == 0 || b % 2 != 0 {
        return Err(Error::Config(format!("batch size must be positive and even, got {b}")));
    }
    if !(0.0..=1.0).contains(&cfg.her_ratio) {
        return Err(Error::Config(format!("her_ratio {} outside [0, 1]", cfg.her_ratio)));
    }
    let n = dataset.num_transitions();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let picks: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
    let mut swapped = vec![false; b];
    if cfg.swap_enabled {
        for i in sample_indices(rng, b, b / 2) {
            swapped[i] = true;
        }
    }
    let mut rows = Vec::with_capacity(b);
    let mut tags = Vec::with_capacity(b);
    for (&flat, &swap) in picks.iter().zip(&swapped) {
        let (ti, si) = dataset.locate(flat);
        let traj = &dataset.trajectories()[ti];
        if swap {
            let g_rand = random_goal(dataset, cfg.goal_source, rng);
            rows.push(swap_goal(&traj.steps[si], g_rand, cfg.epsilon));
            tags.push(AugTag::Swapped);
        } else if cfg.her_ratio > 0.0 && rng.random::<f64>() < cfg.her_ratio {
            rows.push(relabel_hindsight(traj, si, cfg.epsilon, rng));
            tags.push(AugTag::Hindsight);
        } else {
            rows.push(traj.steps[si]);
            tags.push(AugTag::Original);
        }
    }
    Ok(MiniBatch { rows, tags })
}
