//! The denoiser interface driven by the rollout, and a deterministic stand-in
//! that converges to ground-truth renders.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::camera::{embed_and_inject, group_per_latent, poses_to_plucker, CameraEmbedder};
use crate::error::Result;
use crate::memory::{rotation_trace, translation_distance};
use crate::se3::Pose;
use crate::world::{encode, render_image, Camera, Scene, ToyLatent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextRole {
    Sink,
    ShortTerm,
    LongTerm,
}

/// One fully denoised latent offered to the denoiser as context.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextItem {
    pub role: ContextRole,
    pub id: u64,
    pub frames: Range<u64>,
    /// Poses relative to the window origin.
    pub poses: Vec<Pose>,
    pub latent: ToyLatent,
    /// Camera embedding injected for this latent.
    pub features: DMatrix<f64>,
}

/// Everything shared by all progressive slots during one stage.
#[derive(Debug, Clone)]
pub struct Conditioning {
    /// Increments whenever the context changes.
    pub epoch: u64,
    pub window_origin: Pose,
    pub items: Vec<ContextItem>,
}

impl Conditioning {
    pub fn count(&self, role: ContextRole) -> usize {
        self.items.iter().filter(|i| i.role == role).count()
    }
}

/// The latent being denoised.
#[derive(Debug, Clone, Copy)]
pub struct StepTarget<'a> {
    pub slot: usize,
    pub latent_index: u64,
    pub frames: &'a Range<u64>,
    pub global_poses: &'a [Pose],
    pub relative_poses: &'a [Pose],
    /// Injected camera features for this latent.
    pub features: &'a DMatrix<f64>,
}

pub trait Denoiser {
    /// Called once when a latent enters the window.
    fn prepare(&mut self, _latent_index: u64, _global_poses: &[Pose]) -> Result<()> {
        Ok(())
    }

    /// One step from `sigma_from` to `sigma_to < sigma_from`.
    fn step(&mut self, target: &StepTarget<'_>, latent: &ToyLatent, sigma_from: f64, sigma_to: f64, ctx: &Conditioning) -> Result<ToyLatent>;

    /// Called once the latent has been emitted.
    fn release(&mut self, _latent_index: u64) {}
}

/// Camera embedding of a pose set relative to `origin`, injected into zero
/// features.
pub fn camera_features(poses: &[Pose], origin: &Pose, embedder: &CameraEmbedder) -> Result<DMatrix<f64>> {
    let code = group_per_latent(&poses_to_plucker(poses, origin), embedder.r)?;
    let base = DMatrix::zeros(code.latents(), embedder.features());
    embed_and_inject(&code, &base, embedder)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConfig {
    /// Hallucination amplitude of a fresh view, in latent units.
    pub base: f64,
    /// Relative amplitude growth per generated latent.
    pub growth: f64,
    /// Growth multiplier while a sink is present.
    pub sink_damping: f64,
    /// Short-term size at which the short-term penalty vanishes.
    pub short_term_ref: usize,
    /// Convergence floor added to both noise levels when the injected camera
    /// features do not match the latent's true poses.
    pub miss_floor: f64,
    /// Length scale of positional relevance, world units.
    pub position_scale: f64,
    /// Exponent on the rotational relevance term.
    pub rotation_power: i32,
    /// Exponent sharpening the context blend weights.
    pub blend_power: i32,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            base: 0.04,
            growth: 0.02,
            sink_damping: 0.25,
            short_term_ref: 8,
            miss_floor: 0.05,
            position_scale: 0.2,
            rotation_power: 16,
            blend_power: 4,
        }
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 29)
}

/// Gaussian latent seeded by `(seed, stream, index)`.
pub fn seeded_noise(seed: u64, stream: u64, index: u64, h: usize, w: usize, c: usize) -> ToyLatent {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, stream, index));
    let mut l = ToyLatent::zeros(h, w, c);
    for v in l.data.iter_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = g as f32;
    }
    l
}

/// Deterministic stand-in for a trained video denoiser.
///
/// Each step moves the latent toward a fixed point along the straight
/// flow-matching path, `x ← τ + (σ_to/σ_from)(x − τ)`, so the final step to
/// σ = 0 lands exactly on `τ`. The fixed point is the ground-truth render
/// plus an error built per frame. Where the context holds frames seen from
/// nearby poses, their deviations from ground truth are carried over, so a
/// revisited view repeats whatever was generated there before. Elsewhere the
/// error is fresh seeded drift whose amplitude grows with rollout length and
/// with missing sink or short-term context. Sink latents only damp the drift
/// growth; they are not blended. Camera features that disagree with the true poses
/// keep the last step from converging.
pub struct ToyDenoiser {
    scene: Arc<Scene>,
    camera: Camera,
    block: usize,
    r: usize,
    embedder: CameraEmbedder,
    seed: u64,
    pub drift: DriftConfig,
    oracle: HashMap<u64, ToyLatent>,
    fixed_points: HashMap<u64, FixedPoint>,
}

struct FixedPoint {
    epoch: u64,
    latent: ToyLatent,
    camera_ok: bool,
}

const DRIFT_STREAM: u64 = 0xD21F;

impl ToyDenoiser {
    pub fn new(scene: Arc<Scene>, camera: Camera, block: usize, embedder: CameraEmbedder, seed: u64, drift: DriftConfig) -> Self {
        Self {
            scene,
            camera,
            block,
            r: embedder.r,
            embedder,
            seed,
            drift,
            oracle: HashMap::new(),
            fixed_points: HashMap::new(),
        }
    }

    /// Ground-truth latent for a slot, rendered on `prepare`.
    pub fn oracle(&self, latent_index: u64) -> Option<&ToyLatent> {
        self.oracle.get(&latent_index)
    }

    fn render_oracle(&self, poses: &[Pose]) -> Result<ToyLatent> {
        let frames: Vec<_> = poses.iter().map(|p| render_image(&self.scene, p, &self.camera)).collect();
        encode(&frames, self.r, self.block)
    }

    fn relevance(&self, a: &Pose, b: &Pose) -> f64 {
        let d = translation_distance(a, b) / self.drift.position_scale;
        let cos = ((rotation_trace(a, b) - 1.0) / 2.0).clamp(0.0, 1.0);
        (-d * d).exp() * cos.powi(self.drift.rotation_power)
    }

    fn drift_amplitude(&self, latent_index: u64, ctx: &Conditioning) -> f64 {
        let d = &self.drift;
        let growth = if ctx.count(ContextRole::Sink) > 0 { d.growth * d.sink_damping } else { d.growth };
        let short = ctx.count(ContextRole::ShortTerm).min(d.short_term_ref) as f64;
        let short_penalty = if d.short_term_ref == 0 { 1.0 } else { 2.0 - short / d.short_term_ref as f64 };
        d.base * (1.0 + growth * latent_index as f64) * short_penalty
    }

    fn fixed_point(&self, target: &StepTarget<'_>, ctx: &Conditioning) -> Result<ToyLatent> {
        let oracle = match self.oracle.get(&target.latent_index) {
            Some(o) => o.clone(),
            None => self.render_oracle(target.global_poses)?,
        };
        let (h, w, c) = (oracle.h, oracle.w, oracle.c);
        let noise = seeded_noise(self.seed, DRIFT_STREAM, target.latent_index, h, w, c);
        let amp = self.drift_amplitude(target.latent_index, ctx);
        let mut out = oracle.clone();

        let remembered: Vec<(&ContextItem, &ToyLatent)> = ctx
            .items
            .iter()
            .filter(|i| i.role != ContextRole::Sink)
            .filter_map(|i| self.oracle.get(&i.id).map(|o| (i, o)))
            .collect();
        for (k, q) in target.relative_poses.iter().enumerate() {
            let mut weights: Vec<(f64, &ToyLatent, &ToyLatent, usize)> = Vec::new();
            let mut best = 0.0f64;
            for (item, item_oracle) in &remembered {
                for (j, p) in item.poses.iter().enumerate() {
                    let rho = self.relevance(q, p);
                    if rho > 1e-12 {
                        best = best.max(rho);
                        weights.push((rho.powi(self.drift.blend_power), &item.latent, item_oracle, j));
                    }
                }
            }
            let novelty = 1.0 - best;
            let total: f64 = weights.iter().map(|w| w.0).sum();
            for px in 0..h * w {
                for ch in 0..3 {
                    let i = px * c + 3 * k + ch;
                    let fresh = amp * noise.data[i] as f64;
                    let carried = if total > 0.0 {
                        weights
                            .iter()
                            .map(|(wt, l, o, j)| {
                                let at = px * l.c + 3 * j + ch;
                                wt * (l.data[at] - o.data[at]) as f64
                            })
                            .sum::<f64>()
                            / total
                    } else {
                        0.0
                    };
                    out.data[i] = (oracle.data[i] as f64 + novelty * fresh + (1.0 - novelty) * carried) as f32;
                }
            }
        }
        Ok(out)
    }

    /// Renders ground truth for context latents this denoiser never saw.
    fn cache_context_oracles(&mut self, ctx: &Conditioning) -> Result<()> {
        for item in &ctx.items {
            if !self.oracle.contains_key(&item.id) {
                let global: Vec<Pose> = item.poses.iter().map(|p| ctx.window_origin * *p).collect();
                let o = self.render_oracle(&global)?;
                self.oracle.insert(item.id, o);
            }
        }
        Ok(())
    }

    fn features_match(&self, target: &StepTarget<'_>, ctx: &Conditioning) -> Result<bool> {
        let expected = camera_features(target.global_poses, &ctx.window_origin, &self.embedder)?;
        Ok(expected.shape() == target.features.shape() && (expected - target.features).amax() <= 1e-9)
    }
}

impl Denoiser for ToyDenoiser {
    fn prepare(&mut self, latent_index: u64, global_poses: &[Pose]) -> Result<()> {
        let oracle = self.render_oracle(global_poses)?;
        self.oracle.insert(latent_index, oracle);
        Ok(())
    }

    fn step(&mut self, target: &StepTarget<'_>, latent: &ToyLatent, sigma_from: f64, sigma_to: f64, ctx: &Conditioning) -> Result<ToyLatent> {
        let cached = matches!(self.fixed_points.get(&target.latent_index), Some(fp) if fp.epoch == ctx.epoch);
        if !cached {
            self.cache_context_oracles(ctx)?;
            let fp = FixedPoint {
                epoch: ctx.epoch,
                latent: self.fixed_point(target, ctx)?,
                camera_ok: self.features_match(target, ctx)?,
            };
            self.fixed_points.insert(target.latent_index, fp);
        }
        let fp = &self.fixed_points[&target.latent_index];
        let floor = if fp.camera_ok { 0.0 } else { self.drift.miss_floor };
        let ratio = ((sigma_to + floor) / (sigma_from + floor)) as f32;
        let mut out = fp.latent.clone();
        for (o, x) in out.data.iter_mut().zip(&latent.data) {
            *o += ratio * (x - *o);
        }
        Ok(out)
    }

    fn release(&mut self, latent_index: u64) {
        self.fixed_points.remove(&latent_index);
    }
}

impl ToyDenoiser {
    /// Fixed point the denoiser currently converges to for a latent.
    pub fn current_fixed_point(&self, latent_index: u64) -> Option<&ToyLatent> {
        self.fixed_points.get(&latent_index).map(|fp| &fp.latent)
    }
}
