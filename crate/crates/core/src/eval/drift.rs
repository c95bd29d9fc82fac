use std::fmt::{self, Write as _};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::errors::{compute_errors, compute_errors_unaligned, TrajectoryErrors};
use crate::error::{Error, Result};
use crate::se3::{compose, exp_twist, linear_step, Pose, Trajectory, Twist, DEFAULT_FRAME_INTERVAL};

/// Distribution of the piecewise-constant screw twists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSampler {
    /// Bound on `|v|` per frame.
    pub max_linear: f64,
    /// Bound on `|ω|` per frame.
    pub max_angular: f64,
    /// Frames each sampled twist is held for.
    pub segment: usize,
    /// Fit a Sim(3) before measuring.
    pub align: bool,
}

impl Default for DriftSampler {
    fn default() -> Self {
        Self {
            max_linear: 0.3,
            max_angular: 0.2,
            segment: 20,
            align: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub method: &'static str,
    /// Mean errors over all trajectories, ×10³.
    pub errors: TrajectoryErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftTable {
    pub n_traj: usize,
    pub length: usize,
    pub seed: u64,
    pub linear: DriftRow,
    pub lie: DriftRow,
}

pub const SCALE: f64 = 1e3;

fn sample_vector(rng: &mut ChaCha8Rng, max: f64) -> Vector3<f64> {
    if max == 0.0 {
        return Vector3::zeros();
    }
    let d = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    let n: f64 = d.norm();
    if n == 0.0 {
        return Vector3::zeros();
    }
    d / n * rng.random_range(0.0..=max)
}

fn sample_twists(seed: u64, index: u64, length: usize, s: &DriftSampler) -> Vec<Twist> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let steps = length.saturating_sub(1);
    let mut out = Vec::with_capacity(steps);
    while out.len() < steps {
        let t = Twist::new(sample_vector(&mut rng, s.max_linear), sample_vector(&mut rng, s.max_angular));
        let n = s.segment.max(1).min(steps - out.len());
        out.extend(std::iter::repeat_n(t, n));
    }
    out
}

/// Ground truth, decoupled baseline and single-precision exponential chain
/// for one twist sequence.
pub fn integrate(twists: &[Twist]) -> Result<(Trajectory, Trajectory, Trajectory)> {
    let mut truth = vec![Pose::identity()];
    let mut linear = vec![Pose::identity()];
    let mut lie = vec![Pose::<f32>::identity()];
    for t in twists {
        truth.push(compose(truth.last().unwrap(), &exp_twist(t)?));
        linear.push(linear_step(linear.last().unwrap(), t));
        lie.push(compose(lie.last().unwrap(), &exp_twist(&t.cast::<f32>())?));
    }
    let lie = lie.iter().map(|p| p.cast::<f64>()).collect();
    Ok((
        Trajectory::from_poses(truth, DEFAULT_FRAME_INTERVAL)?,
        Trajectory::from_poses(linear, DEFAULT_FRAME_INTERVAL)?,
        Trajectory::from_poses(lie, DEFAULT_FRAME_INTERVAL)?,
    ))
}

fn measure(est: &Trajectory, reference: &Trajectory, align: bool) -> Result<TrajectoryErrors> {
    if align {
        Ok(compute_errors(est, reference, 1)?.0)
    } else {
        compute_errors_unaligned(est, reference, 1)
    }
}

fn mean_scaled(all: &[TrajectoryErrors]) -> TrajectoryErrors {
    let n = all.len().max(1) as f64;
    let mut m = TrajectoryErrors::default();
    for e in all {
        m.rpe_trans += e.rpe_trans;
        m.rpe_rot += e.rpe_rot;
        m.rpe_camera += e.rpe_camera;
        m.ate_avg += e.ate_avg;
        m.ate_final += e.ate_final;
    }
    TrajectoryErrors {
        rpe_trans: m.rpe_trans / n * SCALE,
        rpe_rot: m.rpe_rot / n * SCALE,
        rpe_camera: m.rpe_camera / n * SCALE,
        ate_avg: m.ate_avg / n * SCALE,
        ate_final: m.ate_final / n * SCALE,
    }
}

/// Integrates `n_traj` seeded twist sequences of `length` frames with both
/// methods and reports mean errors against the double-precision exponential
/// chain, scaled by 10³.
pub fn run_drift_experiment(n_traj: usize, length: usize, sampler: &DriftSampler, seed: u64) -> Result<DriftTable> {
    if n_traj == 0 || length < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least one trajectory of two frames, got {n_traj} × {length}"
        )));
    }
    let results: Vec<(TrajectoryErrors, TrajectoryErrors)> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let twists = sample_twists(seed, i, length, sampler);
            let (truth, linear, lie) = integrate(&twists)?;
            Ok((measure(&linear, &truth, sampler.align)?, measure(&lie, &truth, sampler.align)?))
        })
        .collect::<Result<_>>()?;
    let (lin, lie): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(DriftTable {
        n_traj,
        length,
        seed,
        linear: DriftRow {
            method: "Linear",
            errors: mean_scaled(&lin),
        },
        lie: DriftRow {
            method: "Lie",
            errors: mean_scaled(&lie),
        },
    })
}

impl DriftTable {
    pub const COLUMNS: [&'static str; 3] = ["RPE_trans", "ATE_avg", "ATE_final"];

    fn row_values(row: &DriftRow) -> [f64; 3] {
        [row.errors.rpe_trans, row.errors.ate_avg, row.errors.ate_final]
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{}\n", Self::COLUMNS.join(","));
        for row in [&self.linear, &self.lie] {
            let v = Self::row_values(row).map(|x| format!("{x:.6}"));
            let _ = writeln!(out, "{},{}", row.method, v.join(","));
        }
        out
    }
}

impl fmt::Display for DriftTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} trajectories × {} frames, seed {} (values ×10³)", self.n_traj, self.length, self.seed)?;
        write!(f, "{:<8}", "method")?;
        for c in Self::COLUMNS {
            write!(f, "{c:>14}")?;
        }
        writeln!(f)?;
        for row in [&self.linear, &self.lie] {
            write!(f, "{:<8}", row.method)?;
            for v in Self::row_values(row) {
                write!(f, "{v:>14.6}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
