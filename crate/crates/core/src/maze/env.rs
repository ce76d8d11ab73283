use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::{distance, sparse_reward, MazeSpec, Vec2};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub position: Vec2,
    pub step_index: usize,
    pub task_goal: Vec2,
}

/// Which start or goal cluster to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cluster {
    Index(usize),
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    /// `0` on success, `-1` otherwise.
    pub train_reward: f64,
    /// Binary success indicator used for evaluation.
    pub eval_reward: f64,
    pub done: bool,
}

/// Samples a start position and a task goal. Random cluster choices are
/// drawn first (start, then goal), followed by the two points.
pub fn reset<R: Rng + ?Sized>(spec: &MazeSpec, rng: &mut R, start: Cluster, goal: Cluster) -> Result<EnvState> {
    let si = pick_cluster(start, rng)?;
    let gi = pick_cluster(goal, rng)?;
    let position = sample_in_disk(spec, spec.start_clusters[si], spec.start_radius, rng);
    let task_goal = sample_in_disk(spec, spec.goal_clusters[gi], spec.goal_radius, rng);
    Ok(EnvState {
        position,
        step_index: 0,
        task_goal,
    })
}

fn pick_cluster<R: Rng + ?Sized>(c: Cluster, rng: &mut R) -> Result<usize> {
    match c {
        Cluster::Index(i) if i < 3 => Ok(i),
        Cluster::Index(i) => Err(Error::Config(format!("cluster index {i} outside 0..3"))),
        Cluster::Random => Ok(rng.random_range(0..3)),
    }
}

/// Uniform point in a disk, rejecting samples that land in walls.
fn sample_in_disk<R: Rng + ?Sized>(spec: &MazeSpec, center: Vec2, radius: f64, rng: &mut R) -> Vec2 {
    if radius == 0.0 {
        return center;
    }
    loop {
        let r = radius * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
        if spec.is_free(p) {
            return p;
        }
    }
}

/// Clips each action component to `[-bound, bound]`; NaN becomes 0.
pub fn clip_action(action: Vec2, bound: f64) -> Vec2 {
    action.map(|a| if a.is_nan() { 0.0 } else { a.clamp(-bound, bound) })
}

/// Moves along one axis, cancelling the displacement if the swept segment
/// touches a wall cell.
fn slide_axis(spec: &MazeSpec, pos: Vec2, axis: usize, delta: f64) -> Vec2 {
    let mut next = pos;
    next[axis] += delta;
    let from = MazeSpec::cell_of(pos[axis]);
    let to = MazeSpec::cell_of(next[axis]);
    let fixed = MazeSpec::cell_of(pos[1 - axis]);
    let (lo, hi) = (from.min(to), from.max(to));
    let blocked = (lo..=hi).any(|k| {
        if axis == 0 {
            spec.is_wall_cell(k, fixed)
        } else {
            spec.is_wall_cell(fixed, k)
        }
    });
    if blocked {
        pos
    } else {
        next
    }
}

/// Resolves a clipped action from `pos`: x first, then y.
pub fn apply_motion(spec: &MazeSpec, pos: Vec2, action: Vec2) -> Vec2 {
    let a = clip_action(action, spec.action_bound);
    let after_x = slide_axis(spec, pos, 0, a[0]);
    slide_axis(spec, after_x, 1, a[1])
}

pub fn step(spec: &MazeSpec, state: &EnvState, action: Vec2) -> Result<StepOutcome> {
    if state.step_index >= spec.horizon {
        return Err(Error::HorizonExceeded {
            step: state.step_index,
            horizon: spec.horizon,
        });
    }
    let position = apply_motion(spec, state.position, action);
    let train_reward = sparse_reward(position, state.task_goal, spec.epsilon);
    let success = train_reward == 0.0;
    debug_assert_eq!(success, distance(position, state.task_goal) < spec.epsilon);
    Ok(StepOutcome {
        state: EnvState {
            position,
            step_index: state.step_index + 1,
            task_goal: state.task_goal,
        },
        train_reward,
        eval_reward: if success { 1.0 } else { 0.0 },
        done: success,
    })
}
