//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use goalswap::agent::{Algorithm, ObsEncoder, TrainConfig};
use goalswap::data::generate_dataset;
use goalswap::eval::{run_episodes, welch_t_test, EvalConfig, EvalMode, EvalReport, NetworkPolicy};
use goalswap::gradcheck::{run_gradcheck, GradcheckOptions};
use goalswap::maze::{astar, planned_action, reset, step, Cluster, MazeSpec};
use goalswap::train::train;

const SEEDS: u64 = 5;
const TRAIN_STEPS: usize = 20_000;
const HIDDEN: [usize; 2] = [64, 64];
const BATCH: usize = 256;
const DATASET_NOISE: f64 = 0.5;
const DATASET_SEED: u64 = 0;
const EVAL_EPISODES: usize = 45;
const ALPHA: f64 = 0.05;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Per-seed fixed-grid reports for one learner.
struct Group {
    reports: Vec<EvalReport>,
}

impl Group {
    fn means(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.mean).collect()
    }

    fn mean(&self) -> f64 {
        let m = self.means();
        m.iter().sum::<f64>() / m.len() as f64
    }

    /// Success grid pooled over seeds.
    fn pooled_grid(&self) -> [[f64; 3]; 3] {
        let mut grid = [[0.0; 3]; 3];
        for r in &self.reports {
            for s in 0..3 {
                for g in 0..3 {
                    grid[s][g] += r.success_grid[s][g] / self.reports.len() as f64;
                }
            }
        }
        grid
    }

    fn solved(&self) -> usize {
        self.pooled_grid().iter().flatten().filter(|&&r| r > 0.0).count()
    }
}

fn run_group(spec: &MazeSpec, algorithm: Algorithm, swap: bool) -> Group {
    let data = generate_dataset(spec, 10, DATASET_NOISE, DATASET_SEED).expect("dataset");
    let enc = ObsEncoder::new(spec);
    let reports = (0..SEEDS)
        .map(|seed| {
            let t = Instant::now();
            let cfg = TrainConfig {
                hidden: HIDDEN.to_vec(),
                batch_size: BATCH,
                total_steps: TRAIN_STEPS,
                swap_enabled: swap,
                seed,
                ..TrainConfig::default()
            };
            let out = train(spec, &data, algorithm, &cfg, |_, _| Ok(())).expect("training");
            let policy = NetworkPolicy::new(out.learner.policy(), enc).expect("policy");
            let ecfg = EvalConfig {
                n_episodes: EVAL_EPISODES,
                mode: EvalMode::FixedGrid,
                seed: 10_000 + seed,
                jobs: 1,
            };
            let episodes = run_episodes(&policy, spec, &ecfg).expect("evaluation");
            let report = EvalReport::from_episodes(&episodes, Some(algorithm), "", &ecfg);
            eprintln!(
                "  {algorithm} aug={} seed={seed}: mean {:.2}, {} combos solved, {:.0}s",
                if swap { "on" } else { "off" },
                report.mean,
                report.solved_combos(),
                t.elapsed().as_secs_f64()
            );
            report
        })
        .collect();
    Group { reports }
}

fn fmt_means(g: &Group) -> String {
    let m: Vec<String> = g.means().iter().map(|v| format!("{v:.1}")).collect();
    format!("[{}]", m.join(", "))
}

fn generalization(aug: &Group, plain: &Group) -> Verdict {
    let cmp = welch_t_test(&aug.means(), &plain.means()).expect("t-test");
    let aug_all = aug.solved() == 9;
    let plain_subset = plain.solved() < 9;
    let ordered = aug.mean() > plain.mean() && cmp.p_value < ALPHA;
    verdict(
        aug_all && plain_subset && ordered,
        format!(
            "aug solves {}/9 combos, no-aug {}/9; means {:.2} {} vs {:.2} {}, Welch p = {:.4}",
            aug.solved(),
            plain.solved(),
            aug.mean(),
            fmt_means(aug),
            plain.mean(),
            fmt_means(plain),
            cmp.p_value
        ),
    )
}

fn td3bc_ordering(aug: &Group, plain: &Group) -> Verdict {
    verdict(
        aug.mean() >= plain.mean(),
        format!("td3bc aug {:.2} {} vs no-aug {:.2} {}", aug.mean(), fmt_means(aug), plain.mean(), fmt_means(plain)),
    )
}

fn method_ordering(dqapg: &Group, gcsl: &Group) -> Verdict {
    let cmp = welch_t_test(&dqapg.means(), &gcsl.means()).expect("t-test");
    verdict(
        dqapg.mean() >= gcsl.mean() && cmp.p_value < ALPHA,
        format!(
            "dqapg-aug {:.2} vs gcsl {:.2} {}, Welch p = {:.4}",
            dqapg.mean(),
            gcsl.mean(),
            fmt_means(gcsl),
            cmp.p_value
        ),
    )
}

fn gradient_suite() -> Verdict {
    let t = Instant::now();
    let report = run_gradcheck(&GradcheckOptions::default()).expect("gradcheck");
    let secs = t.elapsed().as_secs_f64();
    let worst = report.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    verdict(
        report.passed() && secs < 30.0,
        format!("{} checks, worst relative error {worst:.2e} (tol 1e-5), {secs:.2}s", report.checks.len()),
    )
}

fn invariant_suites(spec: &MazeSpec) -> Verdict {
    let data = common::dataset(spec);
    let checks = [
        ("augmentation", common::augmentation_purity(spec, &data, 100_000, 1)),
        ("clamping", common::target_clamping(10_000, 2)),
        ("logged steps", common::logged_step_bounds(spec, &data, 1000)),
        ("serialization", common::serialization_round_trips(&data)),
        ("reproducibility", common::bitwise_reproducible(spec, &data, 1000)),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter_map(|(n, c)| c.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    if failed.is_empty() {
        let names: Vec<String> = checks.iter().map(|(n, c)| format!("{n} ({})", c.as_ref().unwrap())).collect();
        verdict(true, names.join("; "))
    } else {
        verdict(false, failed.join("; "))
    }
}

fn oracle_equivalence(spec: &MazeSpec) -> Verdict {
    let mut problems = Vec::new();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for (si, s) in spec.start_clusters.iter().enumerate() {
        for (gi, g) in spec.goal_clusters.iter().enumerate() {
            let (a, b) = (common::cell(*s), common::cell(*g));
            let planned = astar(spec, a, b).map(|p| p.len() - 1).ok();
            if planned != common::bfs_len(spec, a, b) {
                problems.push(format!("A* length differs from BFS for combo ({si}, {gi})"));
            }
            let mut state = reset(spec, &mut rng, Cluster::Index(si), Cluster::Index(gi)).expect("reset");
            let mut reached = false;
            while !reached && state.step_index < spec.horizon {
                let out = step(spec, &state, planned_action(spec, &state).expect("plan")).expect("step");
                reached = out.done;
                state = out.state;
            }
            if !reached {
                problems.push(format!("expert missed combo ({si}, {gi})"));
            }
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            "A* equals BFS and the noiseless expert succeeds on all 9 combos".into()
        } else {
            problems.join("; ")
        },
    )
}

fn statistical_oracle() -> Verdict {
    let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).expect("t-test");
    verdict(
        (r.t + 1.0).abs() < 1e-3 && (r.p_value - 0.347).abs() < 1e-3,
        format!("t = {:.6}, df = {:.3}, p = {:.6}", r.t, r.df, r.p_value),
    )
}

fn main() {
    let start = Instant::now();
    let spec = MazeSpec::default();
    let mut results: Vec<(u8, &str, Verdict)> = vec![
        (7, "statistical oracle", statistical_oracle()),
        (6, "oracle equivalence", oracle_equivalence(&spec)),
        (4, "gradient suite", gradient_suite()),
        (5, "invariant suites", invariant_suites(&spec)),
    ];

    eprintln!("training {} seeds x 5 configurations, {TRAIN_STEPS} steps each", SEEDS);
    let dq_aug = run_group(&spec, Algorithm::Dqapg, true);
    let dq_plain = run_group(&spec, Algorithm::Dqapg, false);
    let td_aug = run_group(&spec, Algorithm::Td3bc, true);
    let td_plain = run_group(&spec, Algorithm::Td3bc, false);
    let gcsl = run_group(&spec, Algorithm::Gcsl, false);
    results.push((1, "generalization with goal swapping", generalization(&dq_aug, &dq_plain)));
    results.push((2, "td3bc augmentation ordering", td3bc_ordering(&td_aug, &td_plain)));
    results.push((3, "dqapg-aug over gcsl", method_ordering(&dq_aug, &gcsl)));
    results.sort_by_key(|r| r.0);

    for (id, name, v) in &results {
        println!("criterion {id} [{}] {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    let passed = results.iter().filter(|r| r.2.passed).count();
    println!("{passed}/{} criteria passed in {:.0}s", results.len(), start.elapsed().as_secs_f64());
    // criteria 4-7 gate the exit code
    if results.iter().any(|(id, _, v)| *id >= 4 && !v.passed) {
        std::process::exit(1);
    }
}
