//! Grid A* planner and the noisy expert that follows its plans.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::env::{apply_motion, clip_action, EnvState};
use super::spec::{MazeSpec, Vec2};
use crate::error::{Error, Result};

/// How many path cells ahead the expert aims before falling back to
/// nearer waypoints.
const LOOKAHEAD: usize = 4;

type Cell = (usize, usize);

/// Shortest 4-connected path over free cells, unit step cost, Manhattan
/// heuristic. Returns the cells from `from` to `goal` inclusive.
///
/// Ties on `f` prefer nodes closer to the goal, then nodes whose remaining
/// offset is more balanced between the axes, which yields staircase paths
/// through open rooms.
pub fn astar(spec: &MazeSpec, from: Cell, goal: Cell) -> Result<Vec<Cell>> {
    let w = spec.width;
    let free = |c: Cell| !spec.is_wall_cell(c.0 as i64, c.1 as i64);
    if !free(from) || !free(goal) {
        return Err(Error::Maze(format!("planner endpoints {from:?} -> {goal:?} must be free cells")));
    }
    let offset = |c: Cell| (c.0.abs_diff(goal.0), c.1.abs_diff(goal.1));
    let manhattan = |c: Cell| {
        let (dx, dy) = offset(c);
        dx + dy
    };
    let imbalance = |c: Cell| {
        let (dx, dy) = offset(c);
        dx.abs_diff(dy)
    };
    let idx = |c: Cell| c.1 * w + c.0;

    let mut g_score = vec![usize::MAX; spec.walls.len()];
    let mut came_from: Vec<Option<Cell>> = vec![None; spec.walls.len()];
    let mut closed = vec![false; spec.walls.len()];
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    g_score[idx(from)] = 0;
    open.push(Reverse((manhattan(from), manhattan(from), imbalance(from), counter, from)));

    while let Some(Reverse((_, _, _, _, cell))) = open.pop() {
        if cell == goal {
            let mut path = vec![cell];
            let mut cur = cell;
            while let Some(prev) = came_from[idx(cur)] {
                path.push(prev);
                cur = prev;
            }
            path.reverse();
            return Ok(path);
        }
        if std::mem::replace(&mut closed[idx(cell)], true) {
            continue;
        }
        let g = g_score[idx(cell)];
        let (c, r) = cell;
        let neighbours = [
            (c as i64 + 1, r as i64),
            (c as i64 - 1, r as i64),
            (c as i64, r as i64 + 1),
            (c as i64, r as i64 - 1),
        ];
        for (nc, nr) in neighbours {
            if spec.is_wall_cell(nc, nr) {
                continue;
            }
            let next = (nc as usize, nr as usize);
            if g + 1 < g_score[idx(next)] {
                g_score[idx(next)] = g + 1;
                came_from[idx(next)] = Some(cell);
                counter += 1;
                let h = manhattan(next);
                open.push(Reverse((g + 1 + h, h, imbalance(next), counter, next)));
            }
        }
    }
    Err(Error::Unreachable { from, goal })
}

fn cell_of(spec: &MazeSpec, p: Vec2) -> Result<Cell> {
    let (c, r) = spec.cell(p);
    if spec.is_wall_cell(c, r) {
        return Err(Error::Maze(format!("position {p:?} is inside a wall")));
    }
    Ok((c as usize, r as usize))
}

/// Noise-free expert action: plan with A* from the agent's cell to the
/// goal's cell and head for the furthest of the next few waypoints that
/// can be reached this step without touching a wall.
pub fn planned_action(spec: &MazeSpec, state: &EnvState) -> Result<Vec2> {
    let here = cell_of(spec, state.position)?;
    let goal_cell = cell_of(spec, state.task_goal)?;
    let path = astar(spec, here, goal_cell)?;
    let bound = spec.action_bound;
    let target_of = |k: usize| -> Vec2 {
        if k + 1 == path.len() {
            state.task_goal
        } else {
            [path[k].0 as f64, path[k].1 as f64]
        }
    };
    if path.len() == 1 {
        return Ok(clip_action(sub(state.task_goal, state.position), bound));
    }
    for k in (1..=LOOKAHEAD.min(path.len() - 1)).rev() {
        let action = clip_action(sub(target_of(k), state.position), bound);
        let expected = [state.position[0] + action[0], state.position[1] + action[1]];
        if apply_motion(spec, state.position, action) == expected {
            return Ok(action);
        }
    }
    // The adjacent waypoint is always reachable from inside the current cell.
    Ok(clip_action(sub(target_of(1), state.position), bound))
}

/// Planned action plus per-axis uniform noise in `[-noise_scale, noise_scale]`,
/// clipped to the action bound.
pub fn expert_action<R: Rng + ?Sized>(
    spec: &MazeSpec,
    state: &EnvState,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Vec2> {
    let mut action = planned_action(spec, state)?;
    if noise_scale > 0.0 {
        for a in &mut action {
            *a += rng.random_range(-noise_scale..=noise_scale);
        }
    }
    Ok(clip_action(action, spec.action_bound))
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::env::step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(position: Vec2, goal: Vec2) -> EnvState {
        EnvState {
            position,
            step_index: 0,
            task_goal: goal,
        }
    }

    #[test]
    fn open_corridor_full_speed_step() {
        let spec = MazeSpec::default();
        let a = planned_action(&spec, &at([5.0, 2.0], [15.0, 2.0])).unwrap();
        assert_eq!(a, [2.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(expert_action(&spec, &at([5.0, 2.0], [15.0, 2.0]), 0.0, &mut rng).unwrap(), [2.0, 0.0]);
    }

    #[test]
    fn final_approach_targets_goal_point() {
        let spec = MazeSpec::default();
        let a = planned_action(&spec, &at([20.0, 2.0], [21.3, 2.2])).unwrap();
        assert!((a[0] - 1.3).abs() < 1e-12 && (a[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn path_endpoints_and_adjacency() {
        let spec = MazeSpec::default();
        let path = astar(&spec, (2, 2), (21, 15)).unwrap();
        assert_eq!(path.first(), Some(&(2, 2)));
        assert_eq!(path.last(), Some(&(21, 15)));
        for pair in path.windows(2) {
            let d = pair[0].0.abs_diff(pair[1].0) + pair[0].1.abs_diff(pair[1].1);
            assert_eq!(d, 1);
        }
        assert!(path.iter().all(|&(c, r)| !spec.is_wall_cell(c as i64, r as i64)));
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let mut spec = MazeSpec::default();
        // seal the bottom-right goal inside walls
        for (c, r) in [(20, 15), (22, 15), (21, 14), (21, 16)] {
            spec.walls[r * spec.width + c] = true;
        }
        assert!(matches!(astar(&spec, (2, 2), (21, 15)), Err(Error::Unreachable { .. })));
        assert!(planned_action(&spec, &at([2.0, 2.0], [21.0, 15.0])).is_err());
    }

    #[test]
    fn noiseless_rollout_is_repeatable() {
        let spec = MazeSpec::default();
        let roll = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut s = at([2.0, 9.0], [21.0, 2.0]);
            let mut trace = vec![s.position];
            for _ in 0..spec.horizon {
                let a = expert_action(&spec, &s, 0.0, &mut rng).unwrap();
                let out = step(&spec, &s, a).unwrap();
                s = out.state;
                trace.push(s.position);
                if out.done {
                    break;
                }
            }
            trace
        };
        assert_eq!(roll(), roll());
    }
}
