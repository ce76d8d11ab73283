use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Algorithm, ObsEncoder};
use crate::error::{Error, Result};
use crate::maze::{reset, step, Cluster, MazeSpec, Vec2};
use crate::nn::Mlp;
use crate::train::PolicySnapshot;

/// Anything that maps `(position, goal)` to an action.
pub trait GoalPolicy: Sync {
    fn act(&self, position: Vec2, goal: Vec2) -> Result<Vec2>;
}

impl<F> GoalPolicy for F
where
    F: Fn(Vec2, Vec2) -> Result<Vec2> + Sync,
{
    fn act(&self, position: Vec2, goal: Vec2) -> Result<Vec2> {
        self(position, goal)
    }
}

/// A deterministic policy network with its input encoder.
#[derive(Clone, Copy, Debug)]
pub struct NetworkPolicy<'a> {
    net: &'a Mlp,
    enc: ObsEncoder,
}

impl<'a> NetworkPolicy<'a> {
    pub fn new(net: &'a Mlp, enc: ObsEncoder) -> Result<Self> {
        if net.input_dim() != ObsEncoder::OBS_DIM || net.output_dim() != ObsEncoder::ACTION_DIM {
            return Err(Error::shape(
                "policy network",
                format!("{} -> {}", ObsEncoder::OBS_DIM, ObsEncoder::ACTION_DIM),
                format!("{} -> {}", net.input_dim(), net.output_dim()),
            ));
        }
        Ok(Self { net, enc })
    }
}

impl GoalPolicy for NetworkPolicy<'_> {
    fn act(&self, position: Vec2, goal: Vec2) -> Result<Vec2> {
        let out = self.net.forward(&self.enc.encode(position, goal))?;
        Ok([out[0], out[1]])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Start and goal clusters drawn uniformly per episode.
    #[default]
    RandomCombo,
    /// Episode `i` runs combination `i mod 9` (start `c / 3`, goal `c % 3`).
    FixedGrid,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_combo" => Ok(EvalMode::RandomCombo),
            "fixed_grid" => Ok(EvalMode::FixedGrid),
            other => Err(Error::Config(format!("unknown eval mode {other:?} (random_combo, fixed_grid)"))),
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::RandomCombo => "random_combo",
            EvalMode::FixedGrid => "fixed_grid",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_episodes: usize,
    pub mode: EvalMode,
    pub seed: u64,
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_episodes: 50,
            mode: EvalMode::RandomCombo,
            seed: 0,
            jobs: 1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::Config("n_episodes must be at least 1".into()));
        }
        if self.mode == EvalMode::FixedGrid && self.n_episodes % 9 != 0 {
            return Err(Error::Config(format!(
                "fixed_grid needs a multiple of 9 episodes, got {}",
                self.n_episodes
            )));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub goal_x: f64,
    pub goal_y: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub index: usize,
    pub start_cluster: usize,
    pub goal_cluster: usize,
    pub cumulative_reward: f64,
    /// Row 0 is the reset state with reward 0.
    pub trace: Vec<TraceRow>,
}

impl Episode {
    pub fn succeeded(&self) -> bool {
        self.cumulative_reward > 0.0
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(out, "step,x,y,goal_x,goal_y,reward").map_err(io)?;
        for r in &self.trace {
            writeln!(out, "{},{},{},{},{},{}", r.step, r.x, r.y, r.goal_x, r.goal_y, r.reward).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Cluster choices of episode `index`.
fn episode_clusters(mode: EvalMode, index: usize) -> (Cluster, Cluster) {
    match mode {
        EvalMode::RandomCombo => (Cluster::Random, Cluster::Random),
        EvalMode::FixedGrid => {
            let c = index % 9;
            (Cluster::Index(c / 3), Cluster::Index(c % 3))
        }
    }
}

fn nearest_cluster(centers: &[Vec2; 3], p: Vec2) -> usize {
    let d = |c: &Vec2| (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
    (0..3).min_by(|&i, &j| d(&centers[i]).total_cmp(&d(&centers[j]))).unwrap_or(0)
}

/// One greedy full-horizon rollout on its own RNG stream.
pub fn run_episode<P: GoalPolicy + ?Sized>(policy: &P, spec: &MazeSpec, cfg: &EvalConfig, index: usize) -> Result<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let (start, goal) = episode_clusters(cfg.mode, index);
    let mut state = reset(spec, &mut rng, start, goal)?;
    let row = |step, p: Vec2, g: Vec2, reward| TraceRow {
        step,
        x: p[0],
        y: p[1],
        goal_x: g[0],
        goal_y: g[1],
        reward,
    };
    let mut trace = Vec::with_capacity(spec.horizon + 1);
    trace.push(row(0, state.position, state.task_goal, 0.0));
    let mut total = 0.0;
    while state.step_index < spec.horizon {
        let action = policy.act(state.position, state.task_goal)?;
        let out = step(spec, &state, action)?;
        state = out.state;
        total += out.eval_reward;
        trace.push(row(state.step_index, state.position, state.task_goal, out.eval_reward));
    }
    let first = trace[0];
    Ok(Episode {
        index,
        start_cluster: nearest_cluster(&spec.start_clusters, [first.x, first.y]),
        goal_cluster: nearest_cluster(&spec.goal_clusters, [first.goal_x, first.goal_y]),
        cumulative_reward: total,
        trace,
    })
}

/// Runs every episode of `cfg`, in parallel when `cfg.jobs > 1`. The
/// result is ordered by episode index either way.
pub fn run_episodes<P: GoalPolicy + ?Sized>(policy: &P, spec: &MazeSpec, cfg: &EvalConfig) -> Result<Vec<Episode>> {
    cfg.validate()?;
    if cfg.jobs == 1 {
        return (0..cfg.n_episodes).map(|i| run_episode(policy, spec, cfg, i)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..cfg.n_episodes)
            .into_par_iter()
            .map(|i| run_episode(policy, spec, cfg, i))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Option<Algorithm>,
    pub seed: u64,
    pub checkpoint: String,
    pub mode: EvalMode,
    pub episode_rewards: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single episode.
    pub std: f64,
    /// Success rate by `[start][goal]` cluster.
    pub success_grid: [[f64; 3]; 3],
    /// Episodes run per `[start][goal]` cluster.
    pub grid_counts: [[usize; 3]; 3],
}

impl EvalReport {
    pub fn from_episodes(episodes: &[Episode], algorithm: Option<Algorithm>, checkpoint: &str, cfg: &EvalConfig) -> Self {
        let rewards: Vec<f64> = episodes.iter().map(|e| e.cumulative_reward).collect();
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let std = if rewards.len() > 1 {
            (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut hits = [[0usize; 3]; 3];
        let mut counts = [[0usize; 3]; 3];
        for e in episodes {
            counts[e.start_cluster][e.goal_cluster] += 1;
            hits[e.start_cluster][e.goal_cluster] += usize::from(e.succeeded());
        }
        let mut grid = [[0.0; 3]; 3];
        for s in 0..3 {
            for g in 0..3 {
                if counts[s][g] > 0 {
                    grid[s][g] = hits[s][g] as f64 / counts[s][g] as f64;
                }
            }
        }
        Self {
            algorithm,
            seed: cfg.seed,
            checkpoint: checkpoint.to_string(),
            mode: cfg.mode,
            episode_rewards: rewards,
            mean,
            std,
            success_grid: grid,
            grid_counts: counts,
        }
    }

    /// Combinations with at least one successful episode.
    pub fn solved_combos(&self) -> usize {
        self.success_grid.iter().flatten().filter(|&&r| r > 0.0).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Evaluates `policy` and summarises the episodes.
pub fn evaluate<P: GoalPolicy + ?Sized>(policy: &P, spec: &MazeSpec, cfg: &EvalConfig) -> Result<EvalReport> {
    let episodes = run_episodes(policy, spec, cfg)?;
    Ok(EvalReport::from_episodes(&episodes, None, "", cfg))
}

/// Evaluates a loaded checkpoint.
pub fn evaluate_snapshot(snapshot: &PolicySnapshot, spec: &MazeSpec, cfg: &EvalConfig) -> Result<EvalReport> {
    let policy = NetworkPolicy::new(&snapshot.policy, snapshot.manifest.encoder)?;
    let episodes = run_episodes(&policy, spec, cfg)?;
    Ok(EvalReport::from_episodes(
        &episodes,
        Some(snapshot.manifest.algorithm),
        &snapshot.source.display().to_string(),
        cfg,
    ))
}
