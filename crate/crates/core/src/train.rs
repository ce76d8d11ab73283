//! Algorithm-agnostic training loop, checkpoints and metrics output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{dqapg_update, Algorithm, AgentNets, BatchArrays, ObsEncoder, StepMetrics, TrainConfig};
use crate::baselines::{gcsl_update, td3bc_update, GcslNets, Td3BcNets};
use crate::data::{sample_batch, AugTag, OfflineDataset};
use crate::error::{Error, Result};
use crate::maze::MazeSpec;
use crate::nn::{load_checkpoint, save_checkpoint, Mlp};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

/// Network set of one of the supported algorithms.
#[derive(Clone, Debug)]
pub enum Learner {
    Dqapg(AgentNets),
    Td3bc(Td3BcNets),
    Gcsl(GcslNets),
}

impl Learner {
    pub fn new(algorithm: Algorithm, cfg: &TrainConfig, action_bound: f64) -> Result<Self> {
        Ok(match algorithm {
            Algorithm::Dqapg => Learner::Dqapg(AgentNets::new(cfg, action_bound)?),
            Algorithm::Td3bc => Learner::Td3bc(Td3BcNets::new(cfg, action_bound)?),
            Algorithm::Gcsl => Learner::Gcsl(GcslNets::new(cfg, action_bound)?),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Learner::Dqapg(_) => Algorithm::Dqapg,
            Learner::Td3bc(_) => Algorithm::Td3bc,
            Learner::Gcsl(_) => Algorithm::Gcsl,
        }
    }

    pub fn policy(&self) -> &Mlp {
        match self {
            Learner::Dqapg(n) => &n.policy,
            Learner::Td3bc(n) => &n.policy,
            Learner::Gcsl(n) => &n.policy,
        }
    }

    pub fn named(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            Learner::Dqapg(n) => n.named(),
            Learner::Td3bc(n) => n.named(),
            Learner::Gcsl(n) => n.named(),
        }
    }

    /// One update from `batch`.
    pub fn update(
        &mut self,
        step_index: usize,
        batch: &crate::data::MiniBatch,
        cfg: &TrainConfig,
        enc: &ObsEncoder,
    ) -> Result<StepMetrics> {
        match self {
            Learner::Dqapg(n) => dqapg_update(step_index, &BatchArrays::new(batch, enc), n, cfg),
            Learner::Td3bc(n) => td3bc_update(step_index, &BatchArrays::new(batch, enc), n, cfg),
            Learner::Gcsl(n) => gcsl_update(step_index, batch, n, enc),
        }
    }

    /// Writes one checkpoint file per network plus the manifest.
    pub fn save(&self, dir: &Path, cfg: &TrainConfig, enc: &ObsEncoder, step: usize) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut networks = Vec::new();
        for (name, net) in self.named() {
            let file = format!("{name}.ckpt");
            save_checkpoint(net, &dir.join(&file))?;
            networks.push(file);
        }
        let manifest = Manifest {
            algorithm: self.algorithm(),
            step,
            networks,
            train_config: cfg.clone(),
            encoder: *enc,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub algorithm: Algorithm,
    pub step: usize,
    pub networks: Vec<String>,
    pub train_config: TrainConfig,
    pub encoder: ObsEncoder,
}

/// A trained policy with its encoder, as loaded from a checkpoint dir.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySnapshot {
    pub manifest: Manifest,
    pub policy: Mlp,
    pub source: PathBuf,
}

impl PolicySnapshot {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if !manifest.networks.iter().any(|n| n == "policy.ckpt") {
            return Err(Error::Format {
                what: "manifest",
                detail: format!("{} lists no policy network", path.display()),
            });
        }
        let policy = load_checkpoint(&dir.join("policy.ckpt"))?;
        Ok(Self {
            manifest,
            policy,
            source: dir.to_path_buf(),
        })
    }
}

/// Streams [`StepMetrics`] rows to CSV.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", StepMetrics::CSV_HEADER).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, m: &StepMetrics) -> Result<()> {
        writeln!(self.out, "{}", m.csv_row()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Row counts by augmentation tag over a whole run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagTotals {
    pub original: usize,
    pub hindsight: usize,
    pub swapped: usize,
}

impl TagTotals {
    fn add(&mut self, tags: &[AugTag]) {
        for t in tags {
            match t {
                AugTag::Original => self.original += 1,
                AugTag::Hindsight => self.hindsight += 1,
                AugTag::Swapped => self.swapped += 1,
            }
        }
    }
}

pub struct TrainOutcome {
    pub learner: Learner,
    pub tags: TagTotals,
    pub skipped_steps: usize,
}

/// Runs `cfg.total_steps` updates. `on_step` sees the learner after each
/// step and may write metrics or checkpoints.
pub fn train<F>(
    spec: &MazeSpec,
    dataset: &OfflineDataset,
    algorithm: Algorithm,
    cfg: &TrainConfig,
    mut on_step: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Learner, &StepMetrics) -> Result<()>,
{
    cfg.validate()?;
    let enc = ObsEncoder::new(spec);
    let sampler = cfg.sampler(spec.epsilon);
    let mut learner = Learner::new(algorithm, cfg, spec.action_bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut tags = TagTotals::default();
    let mut skipped_steps = 0;
    for step in 1..=cfg.total_steps {
        let batch = sample_batch(dataset, &sampler, &mut rng)?;
        tags.add(&batch.tags);
        let metrics = learner.update(step, &batch, cfg, &enc)?;
        skipped_steps += usize::from(metrics.skipped);
        on_step(&learner, &metrics)?;
    }
    Ok(TrainOutcome {
        learner,
        tags,
        skipped_steps,
    })
}

/// [`train`] writing `metrics.csv`, a checkpoint every `checkpoint_every`
/// steps under `checkpoints/step_N`, and the final networks under `final`.
pub fn train_to_dir(
    spec: &MazeSpec,
    dataset: &OfflineDataset,
    algorithm: Algorithm,
    cfg: &TrainConfig,
    out_dir: &Path,
    checkpoint_every: usize,
) -> Result<TrainOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let enc = ObsEncoder::new(spec);
    let mut metrics = MetricsWriter::create(&out_dir.join(METRICS_FILE))?;
    let outcome = train(spec, dataset, algorithm, cfg, |learner, m| {
        metrics.write(m)?;
        if checkpoint_every > 0 && m.step % checkpoint_every == 0 && m.step < cfg.total_steps {
            let dir = out_dir.join("checkpoints").join(format!("step_{}", m.step));
            learner.save(&dir, cfg, &enc, m.step)?;
        }
        if m.step % 1000 == 0 {
            log::info!("{algorithm} step {}: loss_pi {:?}", m.step, m.loss_pi);
        }
        Ok(())
    })?;
    metrics.finish()?;
    outcome.learner.save(&final_dir(out_dir), cfg, &enc, cfg.total_steps)?;
    Ok(outcome)
}

pub fn final_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("final")
}
