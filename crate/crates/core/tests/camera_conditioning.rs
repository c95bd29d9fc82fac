use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistworld::camera::{embed_and_inject, group_per_latent, poses_to_plucker, ungroup, CameraEmbedder, LatentCameraCode};
use twistworld::se3::{compose, exp_so3, exp_twist, Pose, Twist};

fn random_pose(rng: &mut impl Rng) -> Pose {
    let w = Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let t = Vector3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
    Pose::new(exp_so3(&w), t)
}

fn loss_and_grad(e: &CameraEmbedder, code: &LatentCameraCode, g: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let out = e.forward(code).unwrap();
    let loss = g.component_mul(&out).sum() + 0.5 * out.norm_squared();
    (loss, g + out)
}

#[test]
fn embedder_gradients_match_central_differences() {
    let eps = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for cfg in 0..100 {
        let r = rng.random_range(1..=4);
        let hidden = rng.random_range(1..=12);
        let features = rng.random_range(1..=6);
        let latents = rng.random_range(1..=3);
        let e = CameraEmbedder::seeded(r, hidden, features, cfg);
        let reference = random_pose(&mut rng);
        let poses: Vec<Pose> = (0..latents * r).map(|_| random_pose(&mut rng)).collect();
        let code = group_per_latent(&poses_to_plucker(&poses, &reference), r).unwrap();
        let g = DMatrix::from_fn(latents, features, |_, _| rng.random_range(-1.0..1.0));

        let (_, grad_out) = loss_and_grad(&e, &code, &g);
        let analytic = e.backward(&code, &grad_out).unwrap().flatten();
        let params = e.parameters();
        for (i, &a) in analytic.iter().enumerate() {
            let mut probe = e.clone();
            let mut p = params.clone();
            p[i] = params[i] + eps;
            probe.set_parameters(&p).unwrap();
            let up = loss_and_grad(&probe, &code, &g).0;
            p[i] = params[i] - eps;
            probe.set_parameters(&p).unwrap();
            let down = loss_and_grad(&probe, &code, &g).0;
            let fd = (up - down) / (2.0 * eps);
            let scale = a.abs().max(fd.abs());
            if scale > 1e-6 {
                let rel = (a - fd).abs() / scale;
                worst = worst.max(rel);
                assert!(rel <= 1e-5, "config {cfg} parameter {i}: analytic {a:e}, numeric {fd:e}");
            } else {
                assert!((a - fd).abs() <= 1e-10, "config {cfg} parameter {i}: analytic {a:e}, numeric {fd:e}");
            }
        }
    }
    eprintln!("worst relative gradient error {worst:e}");
}

#[test]
fn zero_initialised_embedder_injects_nothing() {
    let e = CameraEmbedder::zero_init(4, 16, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let poses: Vec<Pose> = (0..8).map(|_| random_pose(&mut rng)).collect();
    let code = group_per_latent(&poses_to_plucker(&poses, &Pose::identity()), 4).unwrap();
    let features = DMatrix::from_fn(2, 8, |i, j| (i * 8 + j) as f64);
    assert_eq!(embed_and_inject(&code, &features, &e).unwrap(), features);
}

/// Camera centre and optical axis worked out in world coordinates, then
/// rotated into the reference frame by hand.
fn plucker_oracle(p: &Pose, reference: &Pose) -> [f64; 6] {
    let rt = reference.rotation.transpose();
    let centre = rt * (p.translation - reference.translation);
    let axis = rt * (p.rotation * Vector3::new(0.0, 0.0, 1.0));
    let m = Vector3::new(
        centre.y * axis.z - centre.z * axis.y,
        centre.z * axis.x - centre.x * axis.z,
        centre.x * axis.y - centre.y * axis.x,
    );
    [axis.x, axis.y, axis.z, m.x, m.y, m.z]
}

#[test]
fn plucker_rows_match_hand_derivation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let reference = random_pose(&mut rng);
        let poses: Vec<Pose> = (0..6).map(|_| random_pose(&mut rng)).collect();
        let emb = poses_to_plucker(&poses, &reference);
        for (row, p) in emb.rows.iter().zip(&poses) {
            let want = plucker_oracle(p, &reference);
            for k in 0..6 {
                assert!((row[k] - want[k]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn grouping_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let poses: Vec<Pose> = (0..12).map(|_| random_pose(&mut rng)).collect();
    let emb = poses_to_plucker(&poses, &Pose::identity());
    let code = group_per_latent(&emb, 4).unwrap();
    assert_eq!((code.latents(), code.data.ncols()), (3, 24));
    for j in 0..3 {
        for i in 0..4 {
            for k in 0..6 {
                assert_eq!(code.data[(j, 6 * i + k)], emb.rows[4 * j + i][k]);
            }
        }
    }
    assert_eq!(ungroup(&code), emb);
    assert!(group_per_latent(&emb, 5).is_err());
}

proptest! {
    #[test]
    fn plucker_is_invariant_to_a_shared_rigid_motion(
        v in prop::array::uniform3(-3.0..3.0f64),
        w in prop::array::uniform3(-1.0..1.0f64),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = exp_twist(&Twist::new(Vector3::from(v), Vector3::from(w))).unwrap();
        let reference = random_pose(&mut rng);
        let poses: Vec<Pose> = (0..4).map(|_| random_pose(&mut rng)).collect();
        let moved: Vec<Pose> = poses.iter().map(|p| compose(&g, p)).collect();
        let a = poses_to_plucker(&poses, &reference);
        let b = poses_to_plucker(&moved, &compose(&g, &reference));
        for (x, y) in a.rows.iter().zip(&b.rows) {
            for k in 0..6 {
                prop_assert!((x[k] - y[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plucker_direction_is_unit_and_moment_orthogonal(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = poses_to_plucker(&[random_pose(&mut rng)], &random_pose(&mut rng)).rows[0];
        let d = Vector3::new(row[0], row[1], row[2]);
        let m = Vector3::new(row[3], row[4], row[5]);
        prop_assert!((d.norm() - 1.0).abs() < 1e-12);
        prop_assert!(d.dot(&m).abs() < 1e-9);
    }
}
