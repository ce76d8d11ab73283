use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use goalswap::agent::Algorithm;
use goalswap::data::{generate_dataset, OfflineDataset, DATASET_PATHS};
use goalswap::eval::{
    run_episodes, t_test, EvalConfig, EvalMode, EvalReport, NetworkPolicy, VarianceModel,
};
use goalswap::gradcheck::{run_gradcheck, GradcheckOptions};
use goalswap::train::{train_to_dir, PolicySnapshot};

use crate::config::RunConfig;
use crate::{AlgoArg, Cli, Command, CompareArgs, EvalArgs, GenArgs, GradcheckArgs, ModeArg, Toggle, TrainArgs};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    match cli.command {
        Command::GenDataset(args) => gen_dataset(cfg, args),
        Command::Train(args) => train(cfg, args),
        Command::Eval(args) => eval(cfg, args),
        Command::Compare(args) => compare(args),
        Command::Gradcheck(args) => gradcheck(args),
    }
}

fn gen_dataset(mut cfg: RunConfig, args: GenArgs) -> Result<ExitCode> {
    if let Some(p) = args.out {
        cfg.dataset = p;
    }
    if let Some(n) = args.n_per_path {
        cfg.n_per_path = n;
    }
    if let Some(x) = args.noise {
        cfg.noise_scale = x;
    }
    if let Some(s) = args.seed {
        cfg.dataset_seed = s;
    }
    if args.layout.is_some() {
        cfg.layout = args.layout;
    }
    cfg.validate()?;
    let spec = cfg.maze()?;
    let data = generate_dataset(&spec, cfg.n_per_path, cfg.noise_scale, cfg.dataset_seed)?;
    if let Some(parent) = cfg.dataset.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    data.save(&cfg.dataset)?;
    println!(
        "wrote {} trajectories ({} transitions) to {}",
        data.trajectories().len(),
        data.num_transitions(),
        cfg.dataset.display()
    );
    for (p, &(start, goal)) in DATASET_PATHS.iter().enumerate() {
        let trajs = &data.trajectories()[p * cfg.n_per_path..(p + 1) * cfg.n_per_path];
        let ok = trajs.iter().filter(|t| t.succeeded()).count();
        println!("path s{start}->g{goal}: {ok}/{} successful", trajs.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn train(mut cfg: RunConfig, args: TrainArgs) -> Result<ExitCode> {
    if let Some(a) = args.algo {
        cfg.algorithm = match a {
            AlgoArg::Dqapg => Algorithm::Dqapg,
            AlgoArg::Td3bc => Algorithm::Td3bc,
            AlgoArg::Gcsl => Algorithm::Gcsl,
        };
    }
    if let Some(t) = args.aug {
        cfg.train.swap_enabled = matches!(t, Toggle::On);
    }
    if let Some(n) = args.steps {
        cfg.train.total_steps = n;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out;
    }
    cfg.validate()?;
    let spec = cfg.maze()?;
    let tcfg = cfg.train_config()?;
    if !cfg.dataset.exists() {
        bail!("dataset {} not found; run gen-dataset first", cfg.dataset.display());
    }
    let data = OfflineDataset::load(&cfg.dataset)?;
    let out = cfg.resolved_out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved(&out)?;
    log::info!(
        "training {} (aug {}) for {} steps into {}",
        cfg.algorithm,
        if tcfg.swap_enabled { "on" } else { "off" },
        tcfg.total_steps,
        out.display()
    );
    let outcome = train_to_dir(&spec, &data, cfg.algorithm, &tcfg, &out, cfg.checkpoint_every)?;
    let tags = out.join("batch_tags.json");
    fs::write(&tags, serde_json::to_string_pretty(&outcome.tags)?).with_context(|| format!("writing {}", tags.display()))?;
    log::debug!("batch tags: {:?}", outcome.tags);
    if outcome.skipped_steps > 0 {
        log::warn!("{} steps were skipped", outcome.skipped_steps);
    }
    println!("finished {} steps; final checkpoint in {}", tcfg.total_steps, out.join("final").display());
    Ok(ExitCode::SUCCESS)
}

fn eval(mut cfg: RunConfig, args: EvalArgs) -> Result<ExitCode> {
    if let Some(m) = args.mode {
        cfg.eval_mode = match m {
            ModeArg::RandomCombo => EvalMode::RandomCombo,
            ModeArg::FixedGrid => EvalMode::FixedGrid,
        };
    }
    if let Some(n) = args.episodes {
        cfg.eval_episodes = n;
    } else if cfg.eval_mode == EvalMode::FixedGrid && cfg.eval_episodes % 9 != 0 {
        // Round the default up to a balanced grid.
        cfg.eval_episodes = cfg.eval_episodes.div_ceil(9) * 9;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let spec = cfg.maze()?;
    let snapshot = PolicySnapshot::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let ecfg = EvalConfig {
        n_episodes: cfg.eval_episodes,
        mode: cfg.eval_mode,
        seed: cfg.seed(),
        jobs: cfg.jobs,
    };
    ecfg.validate()?;
    let policy = NetworkPolicy::new(&snapshot.policy, snapshot.manifest.encoder)?;
    let episodes = run_episodes(&policy, &spec, &ecfg)?;
    let report = EvalReport::from_episodes(
        &episodes,
        Some(snapshot.manifest.algorithm),
        &args.checkpoint.display().to_string(),
        &ecfg,
    );
    if let Some(dir) = &args.traces {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for e in &episodes {
            e.write_trace_csv(&dir.join(format!("episode_{:03}.csv", e.index)))?;
        }
    }
    let out = args
        .out
        .unwrap_or_else(|| default_report_path(&args.checkpoint, cfg.eval_mode));
    report.save(&out)?;
    println!("mean cumulative reward {:.2} +- {:.2} over {} episodes", report.mean, report.std, episodes.len());
    println!("success grid (rows: start, cols: goal):");
    for row in &report.success_grid {
        println!("  {:.2} {:.2} {:.2}", row[0], row[1], row[2]);
    }
    println!("report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn default_report_path(checkpoint: &Path, mode: EvalMode) -> PathBuf {
    checkpoint.join(format!("eval_{mode}.json"))
}

fn load_means(paths: &[PathBuf]) -> Result<Vec<f64>> {
    paths
        .iter()
        .map(|p| {
            EvalReport::load(p)
                .with_context(|| format!("loading report {}", p.display()))
                .map(|r| r.mean)
        })
        .collect()
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let a = load_means(&args.a)?;
    let b = load_means(&args.b)?;
    let model = if args.pooled { VarianceModel::Pooled } else { VarianceModel::Welch };
    let result = t_test(&a, &b, model)?;
    let text = serde_json::to_string_pretty(&result)?;
    if let Some(out) = &args.out {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("{text}");
    println!(
        "{}",
        if result.significant {
            "significant at p < 0.05"
        } else {
            "not significant at p < 0.05"
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let opts = GradcheckOptions {
        seed: args.seed,
        corrupt: args.corrupt_gradient,
        ..GradcheckOptions::default()
    };
    let report = run_gradcheck(&opts)?;
    for c in &report.checks {
        println!(
            "{:<24} params {:>4}  max rel error {:.3e}  (tol {:.0e})  {}",
            c.name,
            c.num_params,
            c.max_rel_error,
            c.tolerance,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(if report.passed() {
        println!("all gradient checks passed");
        ExitCode::SUCCESS
    } else {
        println!("gradient checks failed");
        ExitCode::FAILURE
    })
}
