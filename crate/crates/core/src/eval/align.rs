use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::se3::Pose;

/// Similarity transform `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3 {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Sim3 {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Moves the camera center and rotates the orientation.
    pub fn apply_pose(&self, p: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * p.rotation,
            translation: self.apply_point(&p.translation),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Sim3) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.apply_point(&other.translation),
        }
    }
}

/// Least-squares similarity taking `est` positions onto `reference`
/// positions.
pub fn umeyama_align(est: &[Vector3<f64>], reference: &[Vector3<f64>]) -> Result<Sim3> {
    if est.len() != reference.len() {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} poses",
            est.len(),
            reference.len()
        )));
    }
    let n = est.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("alignment needs at least 3 poses, got {n}")));
    }
    let nf = n as f64;
    let mu_x = est.iter().sum::<Vector3<f64>>() / nf;
    let mu_y = reference.iter().sum::<Vector3<f64>>() / nf;
    let var_x = est.iter().map(|x| (x - mu_x).norm_squared()).sum::<f64>() / nf;
    let mut cov = Matrix3::zeros();
    for (x, y) in est.iter().zip(reference) {
        cov += (y - mu_y) * (x - mu_x).transpose();
    }
    cov /= nf;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let (d0, d1) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if !(var_x > 0.0) || !(d0 > 0.0) || d1 <= 1e-12 * d0 {
        return Err(Error::Degenerate("positions are coincident or collinear".into()));
    }
    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // flip the axis of the smallest singular value
        s[(order[2], order[2])] = -1.0;
    }
    let rotation = u * s * v_t;
    let trace_ds: f64 = (0..3).map(|i| svd.singular_values[i] * s[(i, i)]).sum();
    let scale = trace_ds / var_x;
    let translation = mu_y - scale * (rotation * mu_x);
    Ok(Sim3 {
        scale,
        rotation,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::exp_so3;

    fn points() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 2.0, 0.0),
            Vector3::new(0.0, 1.0, 3.0),
        ]
    }

    #[test]
    fn identity_alignment() {
        let p = points();
        let g = umeyama_align(&p, &p).unwrap();
        assert!((g.scale - 1.0).abs() < 1e-12);
        assert!((g.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(g.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_inverse_of_known_similarity() {
        let g = Sim3 {
            scale: 2.5,
            rotation: exp_so3(&Vector3::new(0.3, -1.1, 0.4)),
            translation: Vector3::new(3.0, -2.0, 1.0),
        };
        let reference = points();
        let est: Vec<_> = reference.iter().map(|p| g.apply_point(p)).collect();
        let fit = umeyama_align(&est, &reference).unwrap();
        let inv = g.inverse();
        assert!((fit.scale - inv.scale).abs() < 1e-9);
        assert!((fit.rotation - inv.rotation).norm() < 1e-9);
        assert!((fit.translation - inv.translation).norm() < 1e-9);
    }

    #[test]
    fn reflection_is_not_returned() {
        let reference = points();
        let mirrored: Vec<_> = reference.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let fit = umeyama_align(&mirrored, &reference).unwrap();
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_is_degenerate() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(umeyama_align(&line, &line), Err(Error::Degenerate(_))));
        let same = vec![Vector3::new(1.0, 1.0, 1.0); 4];
        assert!(matches!(umeyama_align(&same, &same), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compose_and_inverse() {
        let g = Sim3 {
            scale: 0.5,
            rotation: exp_so3(&Vector3::new(0.0, 0.7, 0.0)),
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        let id = g.compose(&g.inverse());
        let p = Vector3::new(0.3, -0.2, 5.0);
        assert!((id.apply_point(&p) - p).norm() < 1e-12);
    }
}
