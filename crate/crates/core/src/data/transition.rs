use serde::{Deserialize, Serialize};

use crate::maze::{sparse_reward, Vec2};

/// One environment step, conditioned on a goal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub goal: Vec2,
    pub state: Vec2,
    /// Goal-space image of `state`; the identity projection in the maze.
    pub achieved: Vec2,
    pub action: Vec2,
    /// `0` when `next_achieved` is within epsilon of `goal`, else `-1`.
    pub reward: f64,
    pub next_state: Vec2,
    pub next_achieved: Vec2,
    pub done: bool,
}

impl Transition {
    /// Copy of `self` conditioned on `goal`, with reward and done flag
    /// recomputed from the next achieved goal.
    pub fn with_goal(&self, goal: Vec2, epsilon: f64) -> Self {
        let reward = sparse_reward(self.next_achieved, goal, epsilon);
        Self {
            goal,
            reward,
            done: reward == 0.0,
            ..*self
        }
    }

    /// Whether reward and done flag agree with the goal under `epsilon`.
    pub fn is_reward_consistent(&self, epsilon: f64) -> bool {
        let r = sparse_reward(self.next_achieved, self.goal, epsilon);
        r == self.reward && self.done == (r == 0.0)
    }
}

/// Replaces the goal of `transition` with `g_rand`. State, action, next
/// state and achieved goals are copied untouched.
pub fn swap_goal(transition: &Transition, g_rand: Vec2, epsilon: f64) -> Transition {
    transition.with_goal(g_rand, epsilon)
}

/// On-disk form of one step; the goal lives on the trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct StepRecord {
    pub s: Vec2,
    pub a: Vec2,
    #[serde(serialize_with = "reward_as_int")]
    pub r: f64,
    pub s2: Vec2,
    pub ag: Vec2,
    pub ag2: Vec2,
    pub d: bool,
}

fn reward_as_int<S: serde::Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
    if r.fract() == 0.0 && r.abs() < 1e15 {
        s.serialize_i64(*r as i64)
    } else {
        s.serialize_f64(*r)
    }
}

impl StepRecord {
    pub fn from_transition(t: &Transition) -> Self {
        Self {
            s: t.state,
            a: t.action,
            r: t.reward,
            s2: t.next_state,
            ag: t.achieved,
            ag2: t.next_achieved,
            d: t.done,
        }
    }

    pub fn into_transition(self, goal: Vec2) -> Transition {
        Transition {
            goal,
            state: self.s,
            achieved: self.ag,
            action: self.a,
            reward: self.r,
            next_state: self.s2,
            next_achieved: self.ag2,
            done: self.d,
        }
    }
}
