use std::path::Path;
use std::process::{Command, Output};

fn goalswap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalswap"))
        .args(args)
        .current_dir(dir)
        .env_remove("GOALSWAP_OUTPUT_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: &str = "hidden = 8\nbatch_size = 16\ncheckpoint_every = 5\n";

fn small_setup(dir: &Path) {
    std::fs::write(dir.join("small.cfg"), SMALL).unwrap();
    ok(&goalswap(dir, &["gen-dataset", "--n-per-path", "2", "--out", "d.jsonl"]));
}

#[test]
fn gen_dataset_defaults_to_thirty_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&goalswap(dir.path(), &["gen-dataset"]));
    assert!(stdout.contains("wrote 30 trajectories"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("pointmaze.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 30);
}

#[test]
fn noiseless_single_path_dataset_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&goalswap(dir.path(), &["gen-dataset", "--n-per-path", "1", "--noise", "0"]));
    assert!(stdout.contains("wrote 3 trajectories"));
    assert_eq!(stdout.matches(": 1/1 successful").count(), 3, "{stdout}");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&goalswap(dir.path(), &["gen-dataset", "--seed", "5", "--out", "a.jsonl"]));
    ok(&goalswap(dir.path(), &["gen-dataset", "--seed", "5", "--out", "b.jsonl"]));
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_algorithm_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = goalswap(dir.path(), &["train", "--algo", "sac"]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    std::fs::write(dir.path().join("bad.cfg"), "batch_size = 7\n").unwrap();
    let out = goalswap(dir.path(), &["--config", "bad.cfg", "train", "--dataset", "d.jsonl", "--out", "run"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("run").exists());
}

#[test]
fn train_eval_compare_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_setup(d);
    for (aug, seed) in [("on", "0"), ("on", "1"), ("off", "0"), ("off", "1")] {
        let out = format!("run_{aug}_{seed}");
        ok(&goalswap(
            d,
            &[
                "--config", "small.cfg", "train", "--algo", "dqapg", "--aug", aug, "--steps", "12", "--seed", seed,
                "--dataset", "d.jsonl", "--out", &out,
            ],
        ));
        let metrics = std::fs::read_to_string(d.join(&out).join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 13);
        assert!(d.join(&out).join("checkpoints/step_10/manifest.json").exists());
        let tags: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(&out).join("batch_tags.json")).unwrap()).unwrap();
        assert_eq!(tags["swapped"].as_u64().unwrap() > 0, aug == "on");

        let ckpt = format!("{out}/final");
        let stdout = ok(&goalswap(
            d,
            &["eval", "--checkpoint", &ckpt, "--mode", "fixed_grid", "--episodes", "9", "--out", &format!("{out}.json")],
        ));
        assert!(stdout.contains("success grid"));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(format!("{out}.json"))).unwrap()).unwrap();
        assert_eq!(report["success_grid"].as_array().unwrap().len(), 3);
        assert_eq!(report["episode_rewards"].as_array().unwrap().len(), 9);
    }

    let stdout = ok(&goalswap(
        d,
        &["compare", "--a", "run_on_0.json", "run_on_0.json", "--b", "run_on_0.json", "run_on_0.json", "--out", "same.json"],
    ));
    assert!(stdout.contains("not significant"));
    let same: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("same.json")).unwrap()).unwrap();
    assert_eq!(same["p_value"].as_f64(), Some(1.0));

    ok(&goalswap(
        d,
        &["compare", "--a", "run_on_0.json", "run_on_1.json", "--b", "run_off_0.json", "run_off_1.json", "--out", "cmp.json"],
    ));
    let cmp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("cmp.json")).unwrap()).unwrap();
    let mean = |f: &str| -> f64 {
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(f)).unwrap()).unwrap();
        r["mean"].as_f64().unwrap()
    };
    let direct = goalswap::eval::welch_t_test(
        &[mean("run_on_0.json"), mean("run_on_1.json")],
        &[mean("run_off_0.json"), mean("run_off_1.json")],
    )
    .unwrap();
    assert_eq!(cmp["p_value"].as_f64(), Some(direct.p_value));
    assert_eq!(cmp["significant"].as_bool(), Some(direct.significant));
}

#[test]
fn resolved_config_is_echoed_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_setup(d);
    for out in ["r1", "r2"] {
        ok(&goalswap(
            d,
            &["--config", "small.cfg", "train", "--algo", "td3bc", "--steps", "6", "--dataset", "d.jsonl", "--out", out],
        ));
    }
    let echoed = std::fs::read_to_string(d.join("r1/run_config.txt")).unwrap();
    assert!(echoed.contains("algorithm = td3bc"));
    assert!(echoed.contains("total_steps = 6"));
    for f in ["metrics.csv", "final/policy.ckpt", "final/q1.ckpt", "final/q2_target.ckpt"] {
        assert_eq!(std::fs::read(d.join("r1").join(f)).unwrap(), std::fs::read(d.join("r2").join(f)).unwrap(), "{f}");
    }
    // Re-running from the echoed config reproduces the run.
    ok(&goalswap(d, &["--config", "r1/run_config.txt", "train", "--out", "r3"]));
    assert_eq!(std::fs::read(d.join("r1/final/policy.ckpt")).unwrap(), std::fs::read(d.join("r3/final/policy.ckpt")).unwrap());
}

#[test]
fn output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_setup(d);
    let out = Command::new(env!("CARGO_BIN_EXE_goalswap"))
        .args(["--config", "small.cfg", "train", "--algo", "gcsl", "--aug", "off", "--steps", "3", "--dataset", "d.jsonl"])
        .current_dir(d)
        .env("GOALSWAP_OUTPUT_ROOT", "elsewhere")
        .output()
        .unwrap();
    ok(&out);
    assert!(d.join("elsewhere/gcsl-aug_off-seed0/final/manifest.json").exists());
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = goalswap(dir.path(), &["eval", "--checkpoint", "nowhere"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&goalswap(dir.path(), &["gradcheck"]));
    assert!(stdout.contains("max rel error"));
    assert!(stdout.contains("all gradient checks passed"));
    let out = goalswap(dir.path(), &["gradcheck", "--corrupt-gradient"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
