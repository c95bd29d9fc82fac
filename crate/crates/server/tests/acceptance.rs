//! One line per acceptance criterion, then a single verdict.

mod common;

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistworld::batch::{reference_square_loop, run_rollout, script_lines, DIGESTS_FILE, TIMING_FILE};
use twistworld::camera::{group_per_latent, poses_to_plucker, CameraEmbedder};
use twistworld::config::SessionConfig;
use twistworld::eval::{compute_errors, Sim3};
use twistworld::formats::write_action_script;
use twistworld::memory::{MemoryEntry, MemoryPool};
use twistworld::rollout::Session;
use twistworld::se3::{accumulate, exp_so3, exp_twist, log_pose, Pose, Trajectory, Twist};
use twistworld::world::ToyLatent;
use twistworld_server::protocol::ClientMessage;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn drift_reproduction() -> Outcome {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_twistworld"))
        .args(["--seed", "7", "compare-mapping", "--n", "50", "--len", "200"])
        .output()
        .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let row = |name: &str| -> Vec<f64> {
        text.lines()
            .find(|l| l.starts_with(&format!("{name},")))
            .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
            .unwrap_or_default()
    };
    let (lin, lie) = (row("Linear"), row("Lie"));
    if lin.len() != 3 || lie.len() != 3 {
        return Err(format!("table not found in output:\n{text}"));
    }
    let ok = secs < 10.0 && lie[0] <= 0.01 && lin[0] >= 100.0 * lie[0] && lin[2] >= 1000.0 * lie[2];
    check(
        ok,
        format!(
            "{secs:.2} s; RPE_trans Linear {:.4} vs Lie {:.6} ({:.0}x); ATE_final Linear {:.3} vs Lie {:.6} ({:.0}x)",
            lin[0],
            lie[0],
            lin[0] / lie[0],
            lin[2],
            lie[2],
            lin[2] / lie[2]
        ),
    )
}

fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let x = a / f64::powi(2.0, s);
    let (mut term, mut sum) = (Matrix4::identity(), Matrix4::identity());
    for k in 1..30 {
        term = term * x / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

fn se3_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_exp, mut worst_log) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let v = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64));
        let w = axis.normalize() * rng.random_range(0.0..3.0);
        let t = Twist::new(v, w);
        let hat = Matrix4::new(0.0, -w.z, w.y, v.x, w.z, 0.0, -w.x, v.y, -w.y, w.x, 0.0, v.z, 0.0, 0.0, 0.0, 0.0);
        let p = exp_twist(&t).map_err(|e| e.to_string())?;
        worst_exp = worst_exp.max((p.to_matrix() - expm(&hat)).norm());
        let back = log_pose(&p).map_err(|e| e.to_string())?;
        worst_log = worst_log.max((back.v - v).norm() + (back.w - w).norm());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst_exp <= 1e-10 && worst_log <= 1e-9 && secs < 1.0,
        format!("exp gap {worst_exp:.2e}, round trip {worst_log:.2e}, {secs:.3} s"),
    )
}

fn retrieval_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ties = 0;
    for case in 0..200 {
        let n = rng.random_range(0..=10_000);
        let discrete = case % 2 == 0;
        let mut pool = MemoryPool::new(rng.random_range(0..8));
        for i in 0..n {
            let (rot, t) = if discrete {
                let yaw = rng.random_range(0..4) as f64 * std::f64::consts::FRAC_PI_2;
                let r = Matrix3::new(yaw.cos().round(), 0.0, yaw.sin().round(), 0.0, 1.0, 0.0, -yaw.sin().round(), 0.0, yaw.cos().round());
                (r, Vector3::new(rng.random_range(-2..=2) as f64, 0.0, rng.random_range(-2..=2) as f64))
            } else {
                let w = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                (exp_so3(&w), Vector3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)))
            };
            pool.insert(MemoryEntry {
                id: i as u64,
                pose_set: vec![Pose::new(rot, t)],
                latent: ToyLatent::zeros(1, 1, 3),
                frame_range: i as u64..i as u64 + 1,
            })
            .map_err(|e| e.to_string())?;
        }
        let k = rng.random_range(1..=64);
        let l = rng.random_range(1..=k);
        let query = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 0.0));
        let got: Vec<u64> = pool.retrieve(&query, k, l).map_err(|e| e.to_string())?.iter().map(|e| e.id).collect();

        let visible = pool.len().saturating_sub(pool.exclusion_horizon);
        let mut all: Vec<(f64, u64, Matrix3<f64>)> = pool.entries()[..visible]
            .iter()
            .map(|e| (e.anchor().translation.norm_squared(), e.id, e.anchor().rotation))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        ties += all.windows(2).take(k).filter(|w| w[0].0 == w[1].0).count();
        all.truncate(k);
        let mut scored: Vec<(f64, u64)> = all.into_iter().map(|(_, id, r)| (r.component_mul(&query.rotation).sum(), id)).collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let want: Vec<u64> = scored.into_iter().take(l).map(|(_, id)| id).collect();
        if got != want {
            return Err(format!("case {case} differs: {got:?} vs {want:?}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 5.0, format!("200 cases id-identical ({ties} distance ties), {secs:.2} s"))
}

fn scheduler_accounting() -> Outcome {
    let cfg = SessionConfig::default();
    let mut s = Session::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut frames = s.take_frames().len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let a = twistworld::action::InputState {
            keys: if rng.random_bool(0.7) { "W".parse().unwrap() } else { "A".parse().unwrap() },
            mouse_dx: rng.random_range(-20.0..20.0),
            mouse_dy: rng.random_range(-3.0..3.0),
            dt: 0.05,
        };
        frames += s.push_action(&a).map_err(|e| e.to_string())?.len();
    }
    frames += s.flush().map_err(|e| e.to_string())?.len();
    let a = s.audit();
    let all_n = a.steps_per_emitted.iter().all(|&(_, n)| n == cfg.steps);
    check(
        all_n && a.monotonicity_violations == 0 && a.first_emission_after == Some(cfg.stages as u64) && frames == 504,
        format!(
            "{} latents each {} steps: {all_n}; monotonicity {}/{} violations; first emission after {:?} advances",
            a.emissions, cfg.steps, a.monotonicity_violations, a.monotonicity_checks, a.first_emission_after
        ),
    )
}

fn memory_ablation() -> Outcome {
    let rows: Vec<[f64; 3]> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..20u64)
            .map(|scene| {
                s.spawn(move || {
                    [0usize, 1, 4].map(|l| {
                        let mut cfg = SessionConfig {
                            scene_seed: scene,
                            seed: scene,
                            ..SessionConfig::default()
                        };
                        cfg.window.long_term = l;
                        run_rollout(&cfg, Pose::identity(), &reference_square_loop())
                            .and_then(|r| r.palindrome_psnr())
                            .unwrap_or(f64::NAN)
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mean = |i: usize| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64;
    let between = rows.iter().filter(|r| r[1] >= r[0].min(r[2]) && r[1] <= r[0].max(r[2])).count();
    check(
        mean(2) > mean(0) && between >= 16,
        format!("mean PSNR L0 {:.3} / L1 {:.3} / L4 {:.3} dB; L1 between in {between}/20", mean(0), mean(1), mean(2)),
    )
}

fn umeyama_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let deltas: Vec<Pose> = (0..rng.random_range(10..150))
            .map(|_| {
                exp_twist(&Twist::from_array([
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(0.0..0.5),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                ]))
                .unwrap()
            })
            .collect();
        let reference = accumulate(&deltas);
        let g = Sim3 {
            scale: rng.random_range(0.1..=10.0),
            rotation: exp_so3(&Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))),
            translation: Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
        };
        let est = Trajectory::from_poses(reference.poses.iter().map(|p| g.apply_pose(p)).collect(), 0.05).unwrap();
        let (e, _) = compute_errors(&est, &reference, 1).map_err(|e| e.to_string())?;
        worst = worst.max(e.ate_avg).max(e.ate_final);
    }
    check(worst <= 1e-9, format!("worst post-alignment ATE {worst:.2e}"))
}

fn gradient_check() -> Outcome {
    let eps = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for cfg in 0..100u64 {
        let r = rng.random_range(1..=4);
        let (hidden, features, latents) = (rng.random_range(1..=12), rng.random_range(1..=6), rng.random_range(1..=3));
        let e = CameraEmbedder::seeded(r, hidden, features, cfg);
        let poses: Vec<Pose> = (0..latents * r)
            .map(|_| {
                exp_twist(&Twist::from_array(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))).unwrap()
            })
            .collect();
        let code = group_per_latent(&poses_to_plucker(&poses, &Pose::identity()), r).map_err(|e| e.to_string())?;
        let g = DMatrix::from_fn(latents, features, |_, _| rng.random_range(-1.0..1.0));
        let loss = |m: &CameraEmbedder| {
            let out = m.forward(&code).unwrap();
            g.component_mul(&out).sum() + 0.5 * out.norm_squared()
        };
        let grad_out = &g + e.forward(&code).unwrap();
        let analytic = e.backward(&code, &grad_out).map_err(|e| e.to_string())?.flatten();
        let params = e.parameters();
        for (i, a) in analytic.iter().enumerate() {
            let mut m = e.clone();
            let mut p = params.clone();
            p[i] += eps;
            m.set_parameters(&p).unwrap();
            let up = loss(&m);
            p[i] -= 2.0 * eps;
            m.set_parameters(&p).unwrap();
            let fd = (up - loss(&m)) / (2.0 * eps);
            let scale = a.abs().max(fd.abs());
            if scale > 1e-6 {
                worst = worst.max((a - fd).abs() / scale);
            } else if (a - fd).abs() > 1e-10 {
                return Err(format!("config {cfg} parameter {i}: {a:e} vs {fd:e}"));
            }
        }
    }
    check(worst <= 1e-5, format!("worst relative error {worst:.2e} over 100 configurations"))
}

fn transport_transparency() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = dir.path().join("square.txt");
    std::fs::write(&script, write_action_script(&script_lines(&reference_square_loop()))).map_err(|e| e.to_string())?;
    let out_dir = dir.path().join("cli");
    let o = Command::new(env!("CARGO_BIN_EXE_twistworld"))
        .args(["--seed", "21", "--out", out_dir.to_str().unwrap(), "rollout", "--script", script.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let cli: Vec<(u64, String)> = std::fs::read_to_string(out_dir.join(DIGESTS_FILE))
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| {
            let (i, d) = l.split_once(' ').unwrap();
            (i.parse().unwrap(), d.to_string())
        })
        .collect();

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let served = rt.block_on(async {
        let addr = common::start(SessionConfig::default());
        let s = common::create(addr, serde_json::json!({ "seed": 21 })).await;
        let mut ws = common::connect(addr, s.id).await;
        common::send_actions(&mut ws, &reference_square_loop()).await;
        common::send(&mut ws, &ClientMessage::Flush).await;
        common::collect_digests(&mut ws, cli.len()).await
    });
    check(served == cli, format!("{} frame digests, identical: {}", cli.len(), served == cli))
}

fn interactive_latency() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = dir.path().join("square.txt");
    let actions: Vec<_> = (0..3).flat_map(|_| reference_square_loop()).collect();
    std::fs::write(&script, write_action_script(&script_lines(&actions))).map_err(|e| e.to_string())?;
    let out_dir = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_twistworld"))
        .args(["--out", out_dir.to_str().unwrap(), "rollout", "--script", script.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let report = std::fs::read_to_string(out_dir.join(TIMING_FILE)).map_err(|e| e.to_string())?;
    let median: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("median_ms="))
        .and_then(|v| v.parse().ok())
        .ok_or("no median in timing report")?;
    check(median <= 10.0, format!("median {median:.3} ms/frame at 64x64 over {} actions", actions.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("drift reproduction", drift_reproduction),
        ("SE(3) oracle equivalence", se3_oracle),
        ("retrieval oracle equivalence", retrieval_oracle),
        ("scheduler accounting", scheduler_accounting),
        ("memory ablation direction", memory_ablation),
        ("Umeyama exactness", umeyama_exactness),
        ("gradient check", gradient_check),
        ("determinism and transport transparency", transport_transparency),
        ("interactive latency", interactive_latency),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
