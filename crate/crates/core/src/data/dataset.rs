use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::transition::{StepRecord, Transition};
use crate::error::{Error, Result};
use crate::maze::{expert_action, reset, step, Cluster, MazeSpec, Vec2};

/// Start/goal cluster pairs covered by the generated dataset:
/// A -> 3, B -> 2, C -> 1.
pub const DATASET_PATHS: [(usize, usize); 3] = [(0, 2), (1, 1), (2, 0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Expert,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub task_goal: Vec2,
    pub source: Source,
    pub seed: u64,
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn succeeded(&self) -> bool {
        self.steps.last().is_some_and(|t| t.done)
    }

    /// Start and goal cluster indices nearest to this trajectory's first
    /// state and task goal.
    pub fn combo(&self, spec: &MazeSpec) -> Option<(usize, usize)> {
        let first = self.steps.first()?;
        Some((nearest(&spec.start_clusters, first.state), nearest(&spec.goal_clusters, self.task_goal)))
    }
}

fn nearest(centers: &[Vec2; 3], p: Vec2) -> usize {
    (0..3)
        .min_by(|&a, &b| {
            crate::maze::distance(centers[a], p).total_cmp(&crate::maze::distance(centers[b], p))
        })
        .unwrap()
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    task_goal: Vec2,
    source: Source,
    #[serde(default)]
    seed: u64,
    steps: Vec<StepRecord>,
}

/// Immutable collection of trajectories with a flat `(trajectory, step)`
/// index for uniform transition sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineDataset {
    trajectories: Vec<Trajectory>,
    index: Vec<(u32, u32)>,
}

impl OfflineDataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let index: Vec<(u32, u32)> = trajectories
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.steps.len()).map(move |s| (i as u32, s as u32)))
            .collect();
        if index.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { trajectories, index })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn num_transitions(&self) -> usize {
        self.index.len()
    }

    pub(crate) fn locate(&self, flat: usize) -> (usize, usize) {
        let (t, s) = self.index[flat];
        (t as usize, s as usize)
    }

    pub fn transition(&self, flat: usize) -> &Transition {
        let (t, s) = self.locate(flat);
        &self.trajectories[t].steps[s]
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trajectories {
            let record = TrajectoryRecord {
                task_goal: t.task_goal,
                source: t.source,
                seed: t.seed,
                steps: t.steps.iter().map(StepRecord::from_transition).collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io("<dataset writer>", e))?;
        }
        out.flush().map_err(|e| Error::io("<dataset writer>", e))
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<dataset reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
                what: "dataset",
                detail: format!("line {}: {e}", n + 1),
            })?;
            let goal = record.task_goal;
            trajectories.push(Trajectory {
                task_goal: goal,
                source: record.source,
                seed: record.seed,
                steps: record.steps.into_iter().map(|s| s.into_transition(goal)).collect(),
            });
        }
        Self::new(trajectories)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file))
    }
}

/// Rolls out the noisy A* expert `n_per_path` times along each of the
/// three dataset paths. Episodes end on success or at the horizon.
///
/// Trajectory `k` draws from its own stream `(seed, k)`.
pub fn generate_dataset(spec: &MazeSpec, n_per_path: usize, noise_scale: f64, seed: u64) -> Result<OfflineDataset> {
    if n_per_path == 0 {
        return Err(Error::Config("n_per_path must be at least 1".into()));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::Config(format!("noise scale {noise_scale} must be non-negative")));
    }
    let mut trajectories = Vec::with_capacity(3 * n_per_path);
    for (p, &(start, goal)) in DATASET_PATHS.iter().enumerate() {
        for k in 0..n_per_path {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((p * n_per_path + k) as u64);
            let mut state = reset(spec, &mut rng, Cluster::Index(start), Cluster::Index(goal))?;
            let mut steps = Vec::new();
            while state.step_index < spec.horizon {
                let action = expert_action(spec, &state, noise_scale, &mut rng)?;
                let out = step(spec, &state, action)?;
                steps.push(Transition {
                    goal: state.task_goal,
                    state: state.position,
                    achieved: state.position,
                    action: crate::maze::clip_action(action, spec.action_bound),
                    reward: out.train_reward,
                    next_state: out.state.position,
                    next_achieved: out.state.position,
                    done: out.done,
                });
                state = out.state;
                if out.done {
                    break;
                }
            }
            trajectories.push(Trajectory {
                task_goal: state.task_goal,
                source: Source::Expert,
                seed,
                steps,
            });
        }
    }
    OfflineDataset::new(trajectories)
}
