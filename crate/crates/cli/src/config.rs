//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use goalswap::agent::{Algorithm, TrainConfig, VTargetMode};
use goalswap::data::GoalSource;
use goalswap::eval::EvalMode;
use goalswap::maze::MazeSpec;

pub const OUTPUT_ROOT_ENV: &str = "GOALSWAP_OUTPUT_ROOT";
pub const RESOLVED_CONFIG_FILE: &str = "run_config.txt";

/// Every setting of a run. All fields have defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Maze layout file; the bundled layout when unset.
    pub layout: Option<PathBuf>,
    pub start_radius: f64,
    pub goal_radius: f64,
    pub epsilon: f64,
    pub action_bound: f64,
    pub horizon: usize,
    pub dataset: PathBuf,
    pub n_per_path: usize,
    pub noise_scale: f64,
    pub dataset_seed: u64,
    pub algorithm: Algorithm,
    pub output_root: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub eval_mode: EvalMode,
    pub eval_episodes: usize,
    pub jobs: usize,
    /// Seed and horizon inside are overwritten from the fields above.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let maze = MazeSpec::default();
        Self {
            layout: None,
            start_radius: maze.start_radius,
            goal_radius: maze.goal_radius,
            epsilon: maze.epsilon,
            action_bound: maze.action_bound,
            horizon: maze.horizon,
            dataset: PathBuf::from("pointmaze.jsonl"),
            n_per_path: 10,
            noise_scale: 0.5,
            dataset_seed: 0,
            algorithm: Algorithm::Dqapg,
            output_root: PathBuf::from("runs"),
            out_dir: None,
            checkpoint_every: 5000,
            eval_mode: EvalMode::RandomCombo,
            eval_episodes: 50,
            jobs: 1,
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => bail!("{key}: expected true/false, got {value:?}"),
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", n + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "layout" => self.layout = (!value.is_empty()).then(|| PathBuf::from(value)),
            "start_radius" => self.start_radius = parse(key, value)?,
            "goal_radius" => self.goal_radius = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "action_bound" => self.action_bound = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "dataset" => self.dataset = PathBuf::from(value),
            "n_per_path" => self.n_per_path = parse(key, value)?,
            "noise_scale" => self.noise_scale = parse(key, value)?,
            "dataset_seed" => self.dataset_seed = parse(key, value)?,
            "algorithm" => self.algorithm = parse(key, value)?,
            "output_root" => self.output_root = PathBuf::from(value),
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "eval_mode" => self.eval_mode = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "rho" => t.rho = parse(key, value)?,
            "target_update_every" => t.target_update_every = parse(key, value)?,
            "her_ratio" => t.her_ratio = parse(key, value)?,
            "swap_enabled" => t.swap_enabled = parse_bool(key, value)?,
            "goal_source" => {
                t.goal_source = match value {
                    "task_goal" => GoalSource::TaskGoal,
                    "achieved_goal" => GoalSource::AchievedGoal,
                    _ => bail!("goal_source: expected task_goal or achieved_goal, got {value:?}"),
                }
            }
            "adv_clip" => t.adv_clip = parse(key, value)?,
            "total_steps" => t.total_steps = parse(key, value)?,
            "v_target_mode" => {
                t.v_target_mode = match value {
                    "next_state" => VTargetMode::NextState,
                    "same_state" => VTargetMode::SameState,
                    _ => bail!("v_target_mode: expected next_state or same_state, got {value:?}"),
                }
            }
            "hidden" => {
                t.hidden = value
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// The fully resolved config in the same format [`RunConfig::parse_str`] reads.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let hidden: Vec<String> = t.hidden.iter().map(usize::to_string).collect();
        let goal_source = match t.goal_source {
            GoalSource::TaskGoal => "task_goal",
            GoalSource::AchievedGoal => "achieved_goal",
        };
        let v_mode = match t.v_target_mode {
            VTargetMode::NextState => "next_state",
            VTargetMode::SameState => "same_state",
        };
        let entries: Vec<(&str, String)> = vec![
            ("layout", path(&self.layout)),
            ("start_radius", self.start_radius.to_string()),
            ("goal_radius", self.goal_radius.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("action_bound", self.action_bound.to_string()),
            ("horizon", self.horizon.to_string()),
            ("dataset", self.dataset.display().to_string()),
            ("n_per_path", self.n_per_path.to_string()),
            ("noise_scale", self.noise_scale.to_string()),
            ("dataset_seed", self.dataset_seed.to_string()),
            ("algorithm", self.algorithm.to_string()),
            ("output_root", self.output_root.display().to_string()),
            ("out_dir", path(&self.out_dir)),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("eval_mode", self.eval_mode.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("jobs", self.jobs.to_string()),
            ("seed", t.seed.to_string()),
            ("gamma", t.gamma.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("rho", t.rho.to_string()),
            ("target_update_every", t.target_update_every.to_string()),
            ("her_ratio", t.her_ratio.to_string()),
            ("swap_enabled", t.swap_enabled.to_string()),
            ("goal_source", goal_source.to_string()),
            ("adv_clip", t.adv_clip.to_string()),
            ("total_steps", t.total_steps.to_string()),
            ("v_target_mode", v_mode.to_string()),
            ("hidden", hidden.join(",")),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Maze from the layout file (or the bundled one) with this config's
    /// radii, threshold, action bound and horizon.
    pub fn maze(&self) -> Result<MazeSpec> {
        let mut spec = match &self.layout {
            Some(path) => MazeSpec::load_layout(path)?,
            None => MazeSpec::default(),
        };
        spec.start_radius = self.start_radius;
        spec.goal_radius = self.goal_radius;
        spec.epsilon = self.epsilon;
        spec.action_bound = self.action_bound;
        spec.horizon = self.horizon;
        spec.validate()?;
        Ok(spec)
    }

    /// Training settings with the run-level seed and horizon applied.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut t = self.train.clone();
        t.horizon = self.horizon;
        t.validate()?;
        Ok(t)
    }

    /// Validates everything a command could need, before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.maze()?;
        self.train_config()?;
        if self.n_per_path == 0 {
            bail!("n_per_path must be at least 1");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            bail!("noise_scale must be non-negative, got {}", self.noise_scale);
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        Ok(())
    }

    /// `out_dir` if set, else a name derived from algorithm, augmentation
    /// and seed under the output root.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            let aug = if self.train.swap_enabled { "on" } else { "off" };
            self.output_root
                .join(format!("{}-aug_{aug}-seed{}", self.algorithm, self.train.seed))
        })
    }

    /// Applies the output-root environment override.
    pub fn apply_env(&mut self) {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV) {
            self.output_root = PathBuf::from(root);
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }
}
