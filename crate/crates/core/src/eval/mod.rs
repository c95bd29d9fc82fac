//! Trajectory metrics and the linear-versus-exponential drift comparison.

mod align;
mod drift;
mod errors;

pub use align::{umeyama_align, Sim3};
pub use drift::{integrate, run_drift_experiment, DriftRow, DriftSampler, DriftTable, SCALE};
pub use errors::{compute_errors, compute_errors_unaligned, geodesic_angle, TrajectoryErrors};
