//! Rigid-body kernels on SE(3).
//!
//! Conventions used everywhere in the crate: right-handed frames, the camera
//! looks along its local +z axis with +y up, and a [`Pose`] is a
//! camera-to-world transform, so `pose.translation` is the camera center in
//! world coordinates. Twists are expressed in the frame of the previous
//! camera and compose on the right: `P_j = P_{j-1} ∘ exp(A_j)`.
//!
//! Everything is generic over [`Real`] so the drift experiment can run the
//! same integrator in single precision.

use nalgebra::{Matrix3, Matrix4, RealField, Vector3};

use crate::error::{Error, Result};

/// Floating-point types the kernels are instantiated for.
pub trait Real: RealField + Copy {
    /// Below this rotation angle the closed-form coefficients switch to their
    /// Taylor expansions.
    const SMALL_ANGLE: f64;
    /// Orthogonality defect `‖RᵀR − I‖_F` above which `compose` re-projects.
    const ORTHO_TOL: f64;

    fn lit(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    const SMALL_ANGLE: f64 = 1e-6;
    const ORTHO_TOL: f64 = 1e-12;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    // single precision cannot resolve 1 - cos(θ) near 1e-6; the truncation
    // error of the expansions below is still under one ulp at 0.05
    const SMALL_ANGLE: f64 = 0.05;
    const ORTHO_TOL: f64 = 1e-6;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Linear and angular velocity over one frame interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist<T: Real = f64> {
    pub v: Vector3<T>,
    pub w: Vector3<T>,
}

impl<T: Real> Twist<T> {
    pub fn new(v: Vector3<T>, w: Vector3<T>) -> Self {
        Self { v, w }
    }

    pub fn zero() -> Self {
        Self {
            v: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    /// Components in `[v_x, v_y, v_z, ω_x, ω_y, ω_z]` order.
    pub fn from_array(a: [T; 6]) -> Self {
        Self {
            v: Vector3::new(a[0], a[1], a[2]),
            w: Vector3::new(a[3], a[4], a[5]),
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.v.x, self.v.y, self.v.z, self.w.x, self.w.y, self.w.z]
    }

    /// Multiplies all six components by `dt`.
    pub fn scale(&self, dt: T) -> Self {
        Self {
            v: self.v * dt,
            w: self.w * dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.to_f64().is_finite())
    }

    pub fn cast<U: Real>(&self) -> Twist<U> {
        Twist {
            v: self.v.map(|c| U::lit(c.to_f64())),
            w: self.w.map(|c| U::lit(c.to_f64())),
        }
    }

    /// The 4×4 matrix `[ω̂ v; 0 0]` in se(3).
    pub fn hat(&self) -> Matrix4<T> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&self.w));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m
    }
}

impl<T: Real> std::ops::Neg for Twist<T> {
    type Output = Twist<T>;
    fn neg(self) -> Self::Output {
        Twist {
            v: -self.v,
            w: -self.w,
        }
    }
}

/// A rigid transform: rotation matrix plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real = f64> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn to_matrix(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads the upper 3×4 block; the bottom row is ignored.
    pub fn from_matrix(m: &Matrix4<T>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthogonality_defect(&self) -> T {
        orthogonality_defect(&self.rotation)
    }

    /// Geodesic rotation angle in `[0, π]`.
    pub fn rotation_angle(&self) -> T {
        rotation_angle(&self.rotation)
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().all(|c| c.to_f64().is_finite())
            && self.translation.iter().all(|c| c.to_f64().is_finite())
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        Pose {
            rotation: self.rotation.map(|c| U::lit(c.to_f64())),
            translation: self.translation.map(|c| U::lit(c.to_f64())),
        }
    }

    /// Checks orthonormality and orientation to within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidArgument("pose has non-finite entries".into()));
        }
        let defect = self.orthogonality_defect().to_f64();
        let det = self.rotation.determinant().to_f64();
        if defect > tol || (det - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "rotation is not special orthogonal (defect {defect:e}, det {det})"
            )));
        }
        Ok(())
    }
}

/// Frobenius distance between two poses' 4×4 matrices.
pub fn pose_distance<T: Real>(a: &Pose<T>, b: &Pose<T>) -> T {
    (a.to_matrix() - b.to_matrix()).norm()
}

pub fn skew<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -w.z, w.y, w.z, z, -w.x, -w.y, w.x, z)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`, times two.
fn vee_antisym<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

fn orthogonality_defect<T: Real>(r: &Matrix3<T>) -> T {
    (r.transpose() * r - Matrix3::identity()).norm()
}

fn rotation_angle<T: Real>(r: &Matrix3<T>) -> T {
    let s = vee_antisym(r).norm() * T::lit(0.5);
    let c = (r.trace() - T::one()) * T::lit(0.5);
    s.atan2(c)
}

/// Nearest rotation in the Frobenius sense (polar factor).
pub fn project_to_rotation<T: Real>(r: &Matrix3<T>) -> Matrix3<T> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut out = u * vt;
    if out.determinant() < T::zero() {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -T::one();
        out = u * d * vt;
    }
    out
}

/// Coefficients `A = sin θ/θ`, `B = (1 − cos θ)/θ²`, `C = (θ − sin θ)/θ³`.
fn exp_coefficients<T: Real>(theta: T) -> (T, T, T) {
    let t2 = theta * theta;
    if theta.to_f64() < T::SMALL_ANGLE {
        (
            T::one() - t2 / T::lit(6.0),
            T::lit(0.5) - t2 / T::lit(24.0),
            T::lit(1.0 / 6.0) - t2 / T::lit(120.0),
        )
    } else {
        let s = theta.sin();
        let half = (theta * T::lit(0.5)).sin();
        (
            s / theta,
            T::lit(2.0) * half * half / t2,
            (theta - s) / (t2 * theta),
        )
    }
}

/// Rotation part of the exponential, `exp(ω̂)` by Rodrigues' formula.
pub fn exp_so3<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let theta = w.norm();
    let (a, b, _) = exp_coefficients(theta);
    let k = skew(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Left Jacobian `V(ω)` mapping `v` to the translation of `exp(Â)`.
pub fn left_jacobian<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let theta = w.norm();
    let (_, b, c) = exp_coefficients(theta);
    let k = skew(w);
    Matrix3::identity() + k * b + k * k * c
}

/// Closed-form exponential of a twist.
pub fn exp_twist<T: Real>(a: &Twist<T>) -> Result<Pose<T>> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument("twist has non-finite components".into()));
    }
    let theta = a.w.norm();
    let (ca, cb, cc) = exp_coefficients(theta);
    let k = skew(&a.w);
    let k2 = k * k;
    let rotation = Matrix3::identity() + k * ca + k2 * cb;
    let v = Matrix3::identity() + k * cb + k2 * cc;
    Ok(Pose {
        rotation,
        translation: v * a.v,
    })
}

/// Principal logarithm; errors when the rotation angle is within 1e-6 of π.
pub fn log_pose<T: Real>(p: &Pose<T>) -> Result<Twist<T>> {
    if !p.is_finite() {
        return Err(Error::InvalidArgument("pose has non-finite entries".into()));
    }
    let r = &p.rotation;
    let vee = vee_antisym(r);
    let theta = rotation_angle(r);
    let angle = theta.to_f64();
    if angle >= std::f64::consts::PI - 1e-6 {
        return Err(Error::NearSingularLog { angle });
    }
    let t2 = theta * theta;
    let (w, d) = if angle < T::SMALL_ANGLE {
        (
            vee * (T::lit(0.5) * (T::one() + t2 / T::lit(6.0))),
            T::lit(1.0 / 12.0) + t2 / T::lit(720.0),
        )
    } else {
        let s = theta.sin();
        let half = (theta * T::lit(0.5)).sin();
        let one_minus_cos = T::lit(2.0) * half * half;
        let w = vee * (theta / (T::lit(2.0) * s));
        let d = (T::one() - theta * s / (T::lit(2.0) * one_minus_cos)) / t2;
        (w, d)
    };
    let k = skew(&w);
    let v_inv = Matrix3::identity() - k * T::lit(0.5) + k * k * d;
    Ok(Twist {
        v: v_inv * p.translation,
        w,
    })
}

/// `a ∘ b`, re-projecting the rotation when its orthogonality defect exceeds
/// [`Real::ORTHO_TOL`].
pub fn compose<T: Real>(a: &Pose<T>, b: &Pose<T>) -> Pose<T> {
    let mut rotation = a.rotation * b.rotation;
    if orthogonality_defect(&rotation).to_f64() > T::ORTHO_TOL {
        rotation = project_to_rotation(&rotation);
    }
    Pose {
        rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

impl<T: Real> std::ops::Mul for Pose<T> {
    type Output = Pose<T>;
    fn mul(self, rhs: Pose<T>) -> Pose<T> {
        compose(&self, &rhs)
    }
}

/// Decoupled update `t ← t + R v`, `R ← R exp(ω̂)`.
///
/// Only exists as the baseline the exponential map is compared against.
pub fn linear_step<T: Real>(prev: &Pose<T>, a: &Twist<T>) -> Pose<T> {
    let translation = prev.translation + prev.rotation * a.v;
    let mut rotation = prev.rotation * exp_so3(&a.w);
    if orthogonality_defect(&rotation).to_f64() > T::ORTHO_TOL {
        rotation = project_to_rotation(&rotation);
    }
    Pose {
        rotation,
        translation,
    }
}

/// Time-ordered global poses, first one at the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    /// Seconds per frame.
    pub frame_interval: f64,
}

pub const DEFAULT_FRAME_INTERVAL: f64 = 0.05;

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            poses: vec![Pose::identity()],
            frame_interval: DEFAULT_FRAME_INTERVAL,
        }
    }
}

impl Trajectory {
    /// Wraps an arbitrary pose list; it must be non-empty.
    pub fn from_poses(poses: Vec<Pose>, frame_interval: f64) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidArgument("trajectory needs at least one pose".into()));
        }
        Ok(Self {
            poses,
            frame_interval,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn last(&self) -> &Pose {
        self.poses.last().expect("trajectory is never empty")
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| p.translation).collect()
    }
}

/// Global poses from relative steps, starting at the identity.
pub fn accumulate(deltas: &[Pose]) -> Trajectory {
    let mut poses = Vec::with_capacity(deltas.len() + 1);
    let mut current = Pose::identity();
    poses.push(current);
    for d in deltas {
        current = compose(&current, d);
        poses.push(current);
    }
    Trajectory {
        poses,
        frame_interval: DEFAULT_FRAME_INTERVAL,
    }
}
