//! Camera conditioning: per-frame Plücker lines, per-latent grouping, and the
//! two-layer embedder whose output is added residually to denoiser features.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::se3::{compose, Pose};

/// One 6-vector per frame: optical-axis direction `d` and moment `m = o × d`,
/// both expressed in the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerEmbedding {
    pub rows: Vec<[f64; 6]>,
}

impl PluckerEmbedding {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Plücker line of a single camera-to-reference pose.
pub fn plucker_row(pose: &Pose) -> [f64; 6] {
    let d: Vector3<f64> = pose.rotation * Vector3::z();
    let m = pose.translation.cross(&d);
    [d.x, d.y, d.z, m.x, m.y, m.z]
}

/// Re-expresses every pose relative to `reference` and emits its optical-axis
/// Plücker line.
pub fn poses_to_plucker(poses: &[Pose], reference: &Pose) -> PluckerEmbedding {
    let inv = reference.inverse();
    PluckerEmbedding {
        rows: poses.iter().map(|p| plucker_row(&compose(&inv, p))).collect(),
    }
}

/// `f × 6r` array: row `j` concatenates the Plücker rows of frames `[jr, jr + r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCameraCode {
    pub r: usize,
    pub data: DMatrix<f64>,
}

impl LatentCameraCode {
    pub fn latents(&self) -> usize {
        self.data.nrows()
    }

    pub fn row(&self, j: usize) -> DMatrix<f64> {
        self.data.rows(j, 1).into_owned()
    }

    /// Stacks single-latent codes vertically.
    pub fn stack(codes: &[LatentCameraCode]) -> Result<LatentCameraCode> {
        let r = codes.first().map(|c| c.r).ok_or_else(|| Error::Shape("no codes to stack".into()))?;
        if codes.iter().any(|c| c.r != r) {
            return Err(Error::Shape("codes disagree on r".into()));
        }
        let rows: usize = codes.iter().map(|c| c.latents()).sum();
        let mut data = DMatrix::zeros(rows, 6 * r);
        let mut at = 0;
        for c in codes {
            data.rows_mut(at, c.latents()).copy_from(&c.data);
            at += c.latents();
        }
        Ok(LatentCameraCode { r, data })
    }
}

pub fn group_per_latent(p: &PluckerEmbedding, r: usize) -> Result<LatentCameraCode> {
    if r == 0 || !p.len().is_multiple_of(r) {
        return Err(Error::Shape(format!("{} frames cannot be grouped by r = {r}", p.len())));
    }
    let f = p.len() / r;
    let data = DMatrix::from_fn(f, 6 * r, |j, c| p.rows[j * r + c / 6][c % 6]);
    Ok(LatentCameraCode { r, data })
}

pub fn ungroup(code: &LatentCameraCode) -> PluckerEmbedding {
    let r = code.r;
    let rows = (0..code.latents() * r)
        .map(|i| {
            let mut row = [0.0; 6];
            for (k, v) in row.iter_mut().enumerate() {
                *v = code.data[(i / r, (i % r) * 6 + k)];
            }
            row
        })
        .collect();
    PluckerEmbedding { rows }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// `c(p) = W2 · silu(W1 · p + b1) + b2`, applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraEmbedder {
    pub r: usize,
    /// `hidden × 6r`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `features × hidden`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// Gradients with the same shapes as the embedder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderGrads {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl EmbedderGrads {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }
}

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_FEATURES: usize = 16;

impl CameraEmbedder {
    pub fn zeros(r: usize, hidden: usize, features: usize) -> Self {
        Self {
            r,
            w1: DMatrix::zeros(hidden, 6 * r),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(features, hidden),
            b2: DVector::zeros(features),
        }
    }

    /// Random first layer, zero second layer: injection starts as the identity.
    pub fn zero_init(r: usize, hidden: usize, features: usize, seed: u64) -> Self {
        let mut e = Self::seeded(r, hidden, features, seed);
        e.w2.fill(0.0);
        e.b2.fill(0.0);
        e
    }

    /// Both layers drawn from scaled normals.
    pub fn seeded(r: usize, hidden: usize, features: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, (1.0 / (6 * r) as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid std");
        let nb = Normal::new(0.0, 0.1).expect("valid std");
        let w1 = DMatrix::from_fn(hidden, 6 * r, |_, _| n1.sample(&mut rng));
        let b1 = DVector::from_fn(hidden, |_, _| nb.sample(&mut rng));
        let w2 = DMatrix::from_fn(features, hidden, |_, _| n2.sample(&mut rng));
        let b2 = DVector::from_fn(features, |_, _| nb.sample(&mut rng));
        Self { r, w1, b1, w2, b2 }
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn features(&self) -> usize {
        self.w2.nrows()
    }

    pub fn input_width(&self) -> usize {
        6 * self.r
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All parameters in `w1, b1, w2, b2` order, matrices column-major.
    pub fn parameters(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for v in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *v = it.next().expect("length checked");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if self.w1.ncols() != 6 * self.r || self.b1.len() != h || self.w2.ncols() != h || self.b2.len() != self.features() {
            return Err(Error::Shape("embedder weight shapes are inconsistent".into()));
        }
        if self.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("embedder has non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_code(&self, code: &LatentCameraCode) -> Result<()> {
        if code.r != self.r || code.data.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "code is {}×{} (r = {}), embedder expects width {}",
                code.data.nrows(),
                code.data.ncols(),
                code.r,
                self.input_width()
            )));
        }
        Ok(())
    }

    fn pre_activation(&self, code: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = code * self.w1.transpose();
        for mut row in h.row_iter_mut() {
            row += self.b1.transpose();
        }
        h
    }

    /// `f × features` embedding of `code`.
    pub fn forward(&self, code: &LatentCameraCode) -> Result<DMatrix<f64>> {
        self.check_code(code)?;
        let a = self.pre_activation(&code.data).map(silu);
        let mut out = a * self.w2.transpose();
        for mut row in out.row_iter_mut() {
            row += self.b2.transpose();
        }
        Ok(out)
    }

    /// Parameter gradients of a scalar loss given `∂loss/∂output`.
    pub fn backward(&self, code: &LatentCameraCode, grad_out: &DMatrix<f64>) -> Result<EmbedderGrads> {
        self.check_code(code)?;
        if grad_out.nrows() != code.latents() || grad_out.ncols() != self.features() {
            return Err(Error::Shape("upstream gradient has the wrong shape".into()));
        }
        let h = self.pre_activation(&code.data);
        let a = h.map(silu);
        let w2 = grad_out.transpose() * &a;
        let b2 = grad_out.row_sum().transpose();
        let da = grad_out * &self.w2;
        let dh = da.component_mul(&h.map(silu_grad));
        let w1 = dh.transpose() * &code.data;
        let b1 = dh.row_sum().transpose();
        Ok(EmbedderGrads { w1, b1, w2, b2 })
    }
}

/// `features + c(code)`.
pub fn embed_and_inject(code: &LatentCameraCode, features: &DMatrix<f64>, e: &CameraEmbedder) -> Result<DMatrix<f64>> {
    if features.nrows() != code.latents() || features.ncols() != e.features() {
        return Err(Error::Shape(format!(
            "features are {}×{}, expected {}×{}",
            features.nrows(),
            features.ncols(),
            code.latents(),
            e.features()
        )));
    }
    Ok(features + e.forward(code)?)
}
