//! Compares linear and Lie integration of random twists, then aligns a
//! transformed trajectory back onto its reference.

use nalgebra::Vector3;
use twistworld::eval::{compute_errors, run_drift_experiment, DriftSampler, Sim3};
use twistworld::se3::{accumulate, exp_so3, exp_twist, Trajectory, Twist};

fn main() -> twistworld::Result<()> {
    let table = run_drift_experiment(50, 200, &DriftSampler::default(), 7)?;
    println!("{table}");

    let step = exp_twist(&Twist::from_array([0.1, 0.0, 0.4, 0.02, 0.15, 0.0]))?;
    let reference = &accumulate(&vec![step; 60]);
    let g = Sim3 { scale: 2.5, rotation: exp_so3(&Vector3::new(0.3, 1.0, -0.2)), translation: Vector3::new(4.0, -1.0, 9.0) };
    let moved = Trajectory::from_poses(reference.poses.iter().map(|p| g.apply_pose(p)).collect(), reference.frame_interval)?;
    let (errors, found) = compute_errors(&moved, reference, 1)?;
    println!("recovered scale {:.6}, ATE after alignment {:.2e}", 1.0 / found.scale, errors.ate_avg);
    Ok(())
}
