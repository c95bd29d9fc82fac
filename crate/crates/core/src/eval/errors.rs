use std::fmt;

use nalgebra::{Matrix3, Vector3};

use super::align::{umeyama_align, Sim3};
use crate::error::{Error, Result};
use crate::se3::{compose, Pose, Trajectory};

/// Relative and absolute trajectory errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryErrors {
    /// Mean relative translation error, world units.
    pub rpe_trans: f64,
    /// Mean relative rotation error, degrees.
    pub rpe_rot: f64,
    /// Mean Frobenius norm of `rel_est ∘ rel_ref⁻¹ − I` on the 3×4 block.
    pub rpe_camera: f64,
    pub ate_avg: f64,
    pub ate_final: f64,
}

impl TrajectoryErrors {
    pub const NAMES: [&'static str; 5] = ["RPE_trans", "RPE_rot", "RPE_camera", "ATE_avg", "ATE_final"];

    pub fn values(&self) -> [f64; 5] {
        [self.rpe_trans, self.rpe_rot, self.rpe_camera, self.ate_avg, self.ate_final]
    }

    pub fn to_csv(&self) -> String {
        let v = self.values().map(|x| format!("{x:.9}"));
        format!("{}\n{}\n", Self::NAMES.join(","), v.join(","))
    }
}

impl fmt::Display for TrajectoryErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in Self::NAMES.iter().zip(self.values()) {
            writeln!(f, "{name:<12}{v:>16.9}")?;
        }
        Ok(())
    }
}

/// Rotation angle of `aᵀb`, radians.
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let m = a.transpose() * b;
    let vee = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    (vee.norm() / 2.0).atan2((m.trace() - 1.0) / 2.0)
}

fn relative(poses: &[Pose], j: usize, delta: usize) -> Pose {
    compose(&poses[j].inverse(), &poses[j + delta])
}

fn errors_of(est: &[Pose], reference: &[Pose], delta: usize) -> TrajectoryErrors {
    let pairs = est.len().saturating_sub(delta);
    let mut out = TrajectoryErrors::default();
    if pairs > 0 {
        for j in 0..pairs {
            let re = relative(est, j, delta);
            let rr = relative(reference, j, delta);
            out.rpe_trans += (re.translation - rr.translation).norm();
            out.rpe_rot += geodesic_angle(&re.rotation, &rr.rotation).to_degrees();
            let residual = compose(&re, &rr.inverse());
            let mut block = residual.to_matrix().fixed_view::<3, 4>(0, 0).into_owned();
            for i in 0..3 {
                block[(i, i)] -= 1.0;
            }
            out.rpe_camera += block.norm();
        }
        let n = pairs as f64;
        out.rpe_trans /= n;
        out.rpe_rot /= n;
        out.rpe_camera /= n;
    }
    let dists: Vec<f64> = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (e.translation - r.translation).norm())
        .collect();
    out.ate_avg = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
    out.ate_final = dists.last().copied().unwrap_or(0.0);
    out
}

fn check(est: &Trajectory, reference: &Trajectory, delta: usize) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} poses",
            est.len(),
            reference.len()
        )));
    }
    if delta == 0 {
        return Err(Error::InvalidArgument("delta must be at least 1".into()));
    }
    Ok(())
}

/// Errors after fitting a Sim(3) from `est` positions onto `reference`.
/// Returns the fitted alignment too.
pub fn compute_errors(est: &Trajectory, reference: &Trajectory, delta: usize) -> Result<(TrajectoryErrors, Sim3)> {
    check(est, reference, delta)?;
    let g = umeyama_align(&est.positions(), &reference.positions())?;
    let aligned: Vec<Pose> = est.poses.iter().map(|p| g.apply_pose(p)).collect();
    Ok((errors_of(&aligned, &reference.poses, delta), g))
}

/// Errors with both trajectories taken as they are.
pub fn compute_errors_unaligned(est: &Trajectory, reference: &Trajectory, delta: usize) -> Result<TrajectoryErrors> {
    check(est, reference, delta)?;
    Ok(errors_of(&est.poses, &reference.poses, delta))
}
