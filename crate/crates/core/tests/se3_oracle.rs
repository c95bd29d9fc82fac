mod common;

use common::{expm, hat};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistworld::se3::{compose, exp_twist, log_pose, pose_distance, Pose, Twist};

fn random_twist(rng: &mut impl Rng, max_angle: f64) -> Twist<f64> {
    let v = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = match rng.random_range(0..4) {
        0 => rng.random_range(0.0..1e-7),
        _ => rng.random_range(0.0..max_angle),
    };
    let w = if dir.norm() > 1e-9 { dir.normalize() * angle } else { Vector3::zeros() };
    Twist::new(v, w)
}

#[test]
fn exp_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = random_twist(&mut rng, 3.1);
        let got = exp_twist(&t).unwrap().to_matrix();
        worst = worst.max((got - expm(&hat(&t))).norm());
    }
    assert!(worst <= 1e-10, "worst Frobenius gap {worst:e}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn log_inverts_exp() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let t = random_twist(&mut rng, 3.0);
        let back = log_pose(&exp_twist(&t).unwrap()).unwrap();
        let gap = (back.v - t.v).norm() + (back.w - t.w).norm();
        assert!(gap <= 1e-9, "round trip gap {gap:e} for {t:?}");
    }
}

#[test]
fn near_pi_rotation_is_reported() {
    let t = Twist::new(Vector3::zeros(), Vector3::new(0.0, std::f64::consts::PI, 0.0));
    assert!(log_pose(&exp_twist(&t).unwrap()).is_err());
}

fn twist_strategy() -> impl Strategy<Value = Twist<f64>> {
    (prop::array::uniform3(-2.0..2.0f64), prop::array::uniform3(-1.0..1.0f64))
        .prop_map(|(v, w)| Twist::new(Vector3::from(v), Vector3::from(w)))
}

proptest! {
    #[test]
    fn compose_is_associative(a in twist_strategy(), b in twist_strategy(), c in twist_strategy()) {
        let (a, b, c) = (exp_twist(&a).unwrap(), exp_twist(&b).unwrap(), exp_twist(&c).unwrap());
        let l = compose(&compose(&a, &b), &c);
        let r = compose(&a, &compose(&b, &c));
        prop_assert!(pose_distance(&l, &r) < 1e-9);
    }

    #[test]
    fn inverse_cancels(a in twist_strategy()) {
        let p = exp_twist(&a).unwrap();
        prop_assert!(pose_distance(&compose(&p, &p.inverse()), &Pose::identity()) < 1e-12);
    }

    #[test]
    fn exp_of_sum_along_one_axis(a in twist_strategy(), s in 0.0..1.0f64) {
        // Twists along the same generator commute, so their exponentials add.
        let p = exp_twist(&a.scale(s)).unwrap();
        let q = exp_twist(&a.scale(1.0 - s)).unwrap();
        prop_assert!(pose_distance(&compose(&p, &q), &exp_twist(&a).unwrap()) < 1e-10);
    }

    #[test]
    fn exp_is_rigid(a in twist_strategy()) {
        let p = exp_twist(&a).unwrap();
        prop_assert!(p.orthogonality_defect() < 1e-12);
        prop_assert!((p.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f32_tracks_f64(a in twist_strategy()) {
        let p64 = exp_twist(&a).unwrap();
        let p32 = exp_twist(&a.cast::<f32>()).unwrap().cast::<f64>();
        prop_assert!(pose_distance(&p64, &p32) < 1e-5);
    }
}
