#![allow(dead_code)]

use std::collections::VecDeque;

use goalswap::agent::{q_targets, v_targets, AgentNets, Algorithm, BatchArrays, StepMetrics, TrainConfig, VTargetMode};
use goalswap::data::{generate_dataset, relabel_hindsight, swap_goal, OfflineDataset, Transition};
use goalswap::maze::{sparse_reward, MazeSpec, Vec2};
use goalswap::nn::{load_checkpoint, save_checkpoint, Mlp};
use goalswap::train::{train, Learner};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

/// Shortest 4-connected path length in cells, by breadth-first search.
pub fn bfs_len(spec: &MazeSpec, from: (usize, usize), goal: (usize, usize)) -> Option<usize> {
    let w = spec.width;
    let mut dist = vec![usize::MAX; spec.walls.len()];
    let mut queue = VecDeque::from([from]);
    dist[from.1 * w + from.0] = 0;
    while let Some((c, r)) = queue.pop_front() {
        let d = dist[r * w + c];
        if (c, r) == goal {
            return Some(d);
        }
        for (dc, dr) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            if spec.is_wall_cell(nc, nr) {
                continue;
            }
            let i = nr as usize * w + nc as usize;
            if dist[i] == usize::MAX {
                dist[i] = d + 1;
                queue.push_back((nc as usize, nr as usize));
            }
        }
    }
    None
}

pub fn cell(p: Vec2) -> (usize, usize) {
    (MazeSpec::cell_of(p[0]) as usize, MazeSpec::cell_of(p[1]) as usize)
}

pub fn dataset(spec: &MazeSpec) -> OfflineDataset {
    generate_dataset(spec, 10, 0.5, 11).expect("dataset")
}

fn same_dynamics(a: &Transition, b: &Transition) -> bool {
    a.state == b.state
        && a.action == b.action
        && a.next_state == b.next_state
        && a.achieved == b.achieved
        && a.next_achieved == b.next_achieved
}

/// Random swaps and hindsight relabels never touch the dynamics fields and
/// always leave reward and done flag consistent with the new goal.
pub fn augmentation_purity(spec: &MazeSpec, data: &OfflineDataset, applications: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajs = data.trajectories();
    let eps = spec.epsilon;
    for k in 0..applications {
        let traj = &trajs[rng.random_range(0..trajs.len())];
        let t = rng.random_range(0..traj.len());
        let src = traj.steps[t];
        let out = if rng.random_bool(0.5) {
            let g = if rng.random_bool(0.5) {
                trajs[rng.random_range(0..trajs.len())].task_goal
            } else {
                [rng.random_range(0.0..spec.width as f64), rng.random_range(0.0..spec.height as f64)]
            };
            let o = swap_goal(&src, g, eps);
            if o.goal != g {
                return Err(format!("application {k}: swapped goal not applied"));
            }
            o
        } else {
            relabel_hindsight(traj, t, eps, &mut rng)
        };
        if !same_dynamics(&src, &out) {
            return Err(format!("application {k}: dynamics fields changed"));
        }
        let r = sparse_reward(out.next_achieved, out.goal, eps);
        if out.reward != r || out.done != (r == 0.0) {
            return Err(format!("application {k}: reward {} / done {} inconsistent", out.reward, out.done));
        }
    }
    Ok(format!("{applications} applications"))
}

fn random_net(dims: &[usize], seed: u64, scale: f64) -> Mlp {
    let mut net = Mlp::new(dims, goalswap::nn::OutputActivation::Identity, seed).unwrap();
    let flat: Vec<f64> = net.to_flat().iter().map(|w| w * scale).collect();
    net.set_flat(&flat).unwrap();
    net
}

/// Q and V targets stay inside `[-H, 0]` for random batches and random,
/// deliberately large-valued target networks.
pub fn target_clamping(batches: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = TrainConfig {
        hidden: vec![8],
        batch_size: 8,
        ..TrainConfig::default()
    };
    let h = cfg.horizon as f64;
    let mut nets = AgentNets::new(&cfg, 2.0).unwrap();
    for k in 0..batches {
        let scale = rng.random_range(0.1..50.0);
        let s = rng.random::<u64>();
        nets.v_target = [random_net(&[4, 8, 1], s, scale), random_net(&[4, 8, 1], s + 1, scale)];
        nets.q_target = [random_net(&[6, 8, 1], s + 2, scale), random_net(&[6, 8, 1], s + 3, scale)];
        nets.q = [random_net(&[6, 8, 1], s + 4, scale), random_net(&[6, 8, 1], s + 5, scale)];
        cfg.v_target_mode = if k % 2 == 0 { VTargetMode::NextState } else { VTargetMode::SameState };
        let n = 8;
        let batch = BatchArrays {
            obs: Array2::from_shape_fn((n, 4), |_| rng.random_range(-3.0..3.0)),
            next_obs: Array2::from_shape_fn((n, 4), |_| rng.random_range(-3.0..3.0)),
            actions: Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0)),
            rewards: Array1::from_shape_fn(n, |_| if rng.random_bool(0.3) { 0.0 } else { -1.0 }),
            not_done: Array1::from_shape_fn(n, |_| if rng.random_bool(0.3) { 0.0 } else { 1.0 }),
            action_bound: 2.0,
        };
        for (name, y) in [
            ("Q", q_targets(&batch, &nets, &cfg).map_err(|e| e.to_string())?),
            ("V", v_targets(&batch, &nets, &cfg).map_err(|e| e.to_string())?),
        ] {
            if let Some(bad) = y.iter().find(|v| !(-h..=0.0).contains(*v)) {
                return Err(format!("batch {k}: {name} target {bad} outside [-{h}, 0]"));
            }
        }
    }
    Ok(format!("{batches} batches"))
}

pub fn small_train_config(steps: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16],
        batch_size: 32,
        total_steps: steps,
        seed,
        ..TrainConfig::default()
    }
}

/// Every logged DQAPG step has weights in `(0, 100]` and positive lambda,
/// and the targets move exactly on multiples of the update period.
pub fn logged_step_bounds(spec: &MazeSpec, data: &OfflineDataset, steps: usize) -> Check {
    let cfg = small_train_config(steps, 2);
    let mut prev_targets: Option<Vec<Vec<f64>>> = None;
    let mut problems = Vec::new();
    let target_params = |l: &Learner| -> Vec<Vec<f64>> {
        l.named()
            .into_iter()
            .filter(|(n, _)| n.ends_with("_target"))
            .map(|(_, net)| net.to_flat())
            .collect()
    };
    let init = Learner::new(Algorithm::Dqapg, &cfg, spec.action_bound).unwrap();
    prev_targets.replace(target_params(&init));
    train(spec, data, Algorithm::Dqapg, &cfg, |learner, m: &StepMetrics| {
        let (lo, hi) = m.w_range.expect("dqapg logs weights");
        if !(lo > 0.0 && hi <= cfg.adv_clip) {
            problems.push(format!("step {}: weights in [{lo}, {hi}]", m.step));
        }
        if !(m.lambda.unwrap() > 0.0) {
            problems.push(format!("step {}: lambda {:?}", m.step, m.lambda));
        }
        let now = target_params(learner);
        let changed: Vec<bool> = now.iter().zip(prev_targets.as_ref().unwrap()).map(|(a, b)| a != b).collect();
        let expect = m.step % cfg.target_update_every == 0;
        if changed.iter().any(|&c| c != expect) {
            problems.push(format!("step {}: target change pattern {changed:?}", m.step));
        }
        prev_targets = Some(now);
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    match problems.first() {
        None => Ok(format!("{steps} steps")),
        Some(p) => Err(format!("{} violations, first: {p}", problems.len())),
    }
}

fn run_fingerprint(spec: &MazeSpec, data: &OfflineDataset, cfg: &TrainConfig, algo: Algorithm) -> (Vec<String>, Vec<Vec<u64>>) {
    let mut rows = Vec::new();
    let out = train(spec, data, algo, cfg, |_, m| {
        rows.push(format!("{m:?}"));
        Ok(())
    })
    .unwrap();
    let params = out
        .learner
        .named()
        .into_iter()
        .map(|(_, n)| n.to_flat().iter().map(|v| v.to_bits()).collect())
        .collect();
    (rows, params)
}

/// Two runs from the same seed agree bit for bit.
pub fn bitwise_reproducible(spec: &MazeSpec, data: &OfflineDataset, steps: usize) -> Check {
    let cfg = small_train_config(steps, 7);
    for algo in [Algorithm::Dqapg, Algorithm::Td3bc, Algorithm::Gcsl] {
        let a = run_fingerprint(spec, data, &cfg, algo);
        let b = run_fingerprint(spec, data, &cfg, algo);
        if a != b {
            return Err(format!("{algo}: runs diverged"));
        }
    }
    Ok(format!("{steps}-step runs of all three learners"))
}

/// JSONL dataset and binary checkpoint round trips are exact.
pub fn serialization_round_trips(data: &OfflineDataset) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("d.jsonl");
    data.save(&path).map_err(|e| e.to_string())?;
    let back = OfflineDataset::load(&path).map_err(|e| e.to_string())?;
    if &back != data {
        return Err("dataset differs after reload".into());
    }
    let nets = AgentNets::new(&small_train_config(1, 3), 2.0).unwrap();
    for (name, net) in nets.named() {
        let p = dir.path().join(format!("{name}.ckpt"));
        save_checkpoint(net, &p).map_err(|e| e.to_string())?;
        let loaded = load_checkpoint(&p).map_err(|e| e.to_string())?;
        let bits = |n: &Mlp| n.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&loaded) != bits(net) || loaded.dims() != net.dims() {
            return Err(format!("checkpoint {name} differs after reload"));
        }
    }
    Ok("dataset and 9 checkpoints".into())
}
