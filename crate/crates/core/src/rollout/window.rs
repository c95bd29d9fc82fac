use std::collections::VecDeque;
use std::ops::Range;

use nalgebra::DMatrix;

use super::denoiser::{camera_features, seeded_noise, Conditioning, ContextItem, ContextRole, Denoiser, StepTarget};
use super::schedule::NoiseSchedule;
use crate::camera::CameraEmbedder;
use crate::error::{Error, Result};
use crate::memory::{MemoryEntry, MemoryPool};
use crate::se3::{compose, Pose};
use crate::world::ToyLatent;

const NOISE_STREAM: u64 = 0x5EED;

/// Context sizes of the sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub sink_size: usize,
    pub short_term: usize,
    /// `L`, retrieved long-term latents per window.
    pub long_term: usize,
    /// `K`, translation candidates considered by retrieval.
    pub retrieval_k: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            sink_size: 1,
            short_term: 8,
            long_term: 4,
            retrieval_k: 16,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.long_term > 0 && self.retrieval_k < self.long_term {
            return Err(Error::InvalidArgument(format!(
                "retrieval_K = {} is smaller than long_term_L = {}",
                self.retrieval_k, self.long_term
            )));
        }
        Ok(())
    }
}

/// A latent being denoised.
#[derive(Debug, Clone)]
pub struct Slot {
    pub latent_index: u64,
    pub frames: Range<u64>,
    pub poses: Vec<Pose>,
    pub latent: ToyLatent,
    pub steps_done: usize,
    relative: Vec<Pose>,
    features: DMatrix<f64>,
}

/// A fully denoised latent leaving the window.
#[derive(Debug, Clone)]
pub struct Emission {
    pub entry: MemoryEntry,
    pub steps: usize,
    /// Long-term ids in the context of its final stage.
    pub retrieved: Vec<u64>,
}

/// Counters checked by the scheduler audit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowAudit {
    pub stage_advances: u64,
    /// Stage advances completed when the first latent was emitted.
    pub first_emission_after: Option<u64>,
    pub emissions: u64,
    /// `(latent id, denoiser steps)` for every emitted latent.
    pub steps_per_emitted: Vec<(u64, usize)>,
    pub monotonicity_checks: u64,
    pub monotonicity_violations: u64,
    pub retrievals: u64,
    pub max_context: usize,
    pub overlap_violations: u64,
}

/// The sliding latent window of progressive inference.
///
/// Slots are kept in age order: slot 0 is the oldest and least noisy, and
/// slot `i` of a full window starts each stage having completed
/// `(S − 1 − i)·N/S` steps.
pub struct RolloutWindow {
    schedule: NoiseSchedule,
    cfg: WindowConfig,
    embedder: CameraEmbedder,
    seed: u64,
    shape: (usize, usize, usize),
    slots: VecDeque<Slot>,
    sink: Vec<MemoryEntry>,
    short_term: VecDeque<MemoryEntry>,
    long_term: Vec<MemoryEntry>,
    pool: MemoryPool,
    window_origin: Pose,
    epoch: u64,
    sink_attached: bool,
    dirty: bool,
    conditioning: Conditioning,
    next_index: u64,
    next_frame: u64,
    audit: WindowAudit,
}

impl RolloutWindow {
    /// `shape` is the latent `(h, w, c)`.
    pub fn new(schedule: NoiseSchedule, cfg: WindowConfig, embedder: CameraEmbedder, seed: u64, shape: (usize, usize, usize)) -> Result<Self> {
        cfg.validate()?;
        embedder.validate()?;
        if shape.2 != 3 * embedder.r {
            return Err(Error::Shape(format!(
                "latent has {} channels, {} frames per latent need {}",
                shape.2,
                embedder.r,
                3 * embedder.r
            )));
        }
        Ok(Self {
            schedule,
            cfg,
            embedder,
            seed,
            shape,
            slots: VecDeque::new(),
            sink: Vec::new(),
            short_term: VecDeque::new(),
            long_term: Vec::new(),
            pool: MemoryPool::new(cfg.short_term),
            window_origin: Pose::identity(),
            epoch: 0,
            sink_attached: false,
            dirty: true,
            conditioning: Conditioning {
                epoch: 0,
                window_origin: Pose::identity(),
                items: Vec::new(),
            },
            next_index: 0,
            next_frame: 0,
            audit: WindowAudit::default(),
        })
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    pub fn slots(&self) -> &VecDeque<Slot> {
        &self.slots
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.schedule.stages()
    }

    pub fn sink(&self) -> &[MemoryEntry] {
        &self.sink
    }

    pub fn short_term(&self) -> &VecDeque<MemoryEntry> {
        &self.short_term
    }

    pub fn long_term(&self) -> &[MemoryEntry] {
        &self.long_term
    }

    pub fn pool(&self) -> &MemoryPool {
        &self.pool
    }

    pub fn window_origin(&self) -> &Pose {
        &self.window_origin
    }

    pub fn audit(&self) -> &WindowAudit {
        &self.audit
    }

    /// Conditioning used by the most recent stage.
    pub fn conditioning(&self) -> &Conditioning {
        &self.conditioning
    }

    /// Noise level of every slot, oldest first.
    pub fn noise_levels(&self) -> Vec<f64> {
        self.slots.iter().map(|s| self.schedule.sigma(s.steps_done)).collect()
    }

    /// Seeds the context with the initial, already clean latents. The first
    /// `sink_size` become the permanent sink; all enter short-term memory and
    /// the pool.
    pub fn attach_sink(&mut self, initial: Vec<MemoryEntry>) -> Result<()> {
        if self.sink_attached {
            return Err(Error::InvalidState("attention sink already attached".into()));
        }
        if !self.slots.is_empty() {
            return Err(Error::InvalidState("sink must be attached before generation starts".into()));
        }
        if initial.len() < self.cfg.sink_size {
            return Err(Error::InvalidArgument(format!(
                "sink needs {} initial latents, got {}",
                self.cfg.sink_size,
                initial.len()
            )));
        }
        for e in initial {
            self.check_entry(&e)?;
            self.pool.insert(e.clone())?;
            self.next_index = e.id + 1;
            self.next_frame = e.frame_range.end;
            if self.sink.len() < self.cfg.sink_size {
                self.sink.push(e.clone());
            }
            self.push_short_term(e);
        }
        self.sink_attached = true;
        self.dirty = true;
        Ok(())
    }

    fn check_entry(&self, e: &MemoryEntry) -> Result<()> {
        if e.pose_set.len() != self.embedder.r {
            return Err(Error::Shape(format!("entry has {} poses, expected {}", e.pose_set.len(), self.embedder.r)));
        }
        if (e.latent.h, e.latent.w, e.latent.c) != self.shape {
            return Err(Error::Shape(format!(
                "entry latent is {}×{}×{}, expected {:?}",
                e.latent.h, e.latent.w, e.latent.c, self.shape
            )));
        }
        Ok(())
    }

    fn push_short_term(&mut self, e: MemoryEntry) {
        if self.cfg.short_term == 0 {
            return;
        }
        if self.short_term.len() == self.cfg.short_term {
            self.short_term.pop_front();
        }
        self.short_term.push_back(e);
    }

    /// Appends a pure-noise latent for the next `r` poses. Returns its index.
    pub fn append<D: Denoiser + ?Sized>(&mut self, d: &mut D, poses: Vec<Pose>) -> Result<u64> {
        if self.is_full() {
            return Err(Error::InvalidState("progressive window is full".into()));
        }
        if poses.len() != self.embedder.r {
            return Err(Error::Shape(format!("a latent covers {} poses, got {}", self.embedder.r, poses.len())));
        }
        let index = self.next_index;
        let frames = self.next_frame..self.next_frame + poses.len() as u64;
        let (h, w, c) = self.shape;
        let latent = seeded_noise(self.seed, NOISE_STREAM, frames.start, h, w, c);
        d.prepare(index, &poses)?;
        if self.slots.is_empty() {
            self.dirty = true;
        }
        let relative: Vec<Pose> = poses.iter().map(|p| compose(&self.window_origin.inverse(), p)).collect();
        let features = camera_features(&poses, &self.window_origin, &self.embedder)?;
        self.slots.push_back(Slot {
            latent_index: index,
            frames: frames.clone(),
            poses,
            latent,
            steps_done: 0,
            relative,
            features,
        });
        self.next_index += 1;
        self.next_frame = frames.end;
        Ok(index)
    }

    /// Removes the fully denoised oldest latent: into short-term memory and
    /// the pool, and out of the window.
    pub fn evict<D: Denoiser + ?Sized>(&mut self, d: &mut D) -> Result<Emission> {
        let n = self.schedule.steps();
        match self.slots.front() {
            None => return Err(Error::Precondition("no latent to emit".into())),
            Some(s) if s.steps_done != n => {
                return Err(Error::Precondition(format!(
                    "slot 0 has completed {} of {n} steps",
                    s.steps_done
                )))
            }
            Some(_) => {}
        }
        let slot = self.slots.pop_front().expect("checked above");
        let entry = MemoryEntry {
            id: slot.latent_index,
            pose_set: slot.poses,
            latent: slot.latent,
            frame_range: slot.frames,
        };
        self.pool.insert(entry.clone())?;
        self.push_short_term(entry.clone());
        d.release(entry.id);
        self.dirty = true;
        self.audit.emissions += 1;
        self.audit.steps_per_emitted.push((entry.id, slot.steps_done));
        if self.audit.first_emission_after.is_none() {
            self.audit.first_emission_after = Some(self.audit.stage_advances);
        }
        Ok(Emission {
            entry,
            steps: slot.steps_done,
            retrieved: self.long_term.iter().map(|e| e.id).collect(),
        })
    }

    /// Evicts slot 0 and appends a fresh latent in the last position.
    pub fn shift_window<D: Denoiser + ?Sized>(&mut self, d: &mut D, next_poses: Vec<Pose>) -> Result<Emission> {
        let out = self.evict(d)?;
        self.append(d, next_poses)?;
        Ok(out)
    }

    /// Recomputes the window origin, long-term retrieval and conditioning.
    fn rebuild(&mut self) -> Result<()> {
        let Some(front) = self.slots.front() else {
            return Ok(());
        };
        self.window_origin = front.poses[0];
        self.long_term = if self.cfg.long_term > 0 {
            self.audit.retrievals += 1;
            self.pool
                .retrieve(&self.window_origin, self.cfg.retrieval_k, self.cfg.long_term)?
                .into_iter()
                .cloned()
                .collect()
        } else {
            Vec::new()
        };
        let inv = self.window_origin.inverse();
        for s in self.slots.iter_mut() {
            s.relative = s.poses.iter().map(|p| compose(&inv, p)).collect();
            s.features = camera_features(&s.poses, &self.window_origin, &self.embedder)?;
        }
        let mut items = Vec::with_capacity(self.sink.len() + self.short_term.len() + self.long_term.len());
        let groups = [
            (ContextRole::Sink, self.sink.iter().collect::<Vec<_>>()),
            (ContextRole::ShortTerm, self.short_term.iter().collect()),
            (ContextRole::LongTerm, self.long_term.iter().collect()),
        ];
        for (role, entries) in groups {
            for e in entries {
                items.push(ContextItem {
                    role,
                    id: e.id,
                    frames: e.frame_range.clone(),
                    poses: e.pose_set.iter().map(|p| compose(&inv, p)).collect(),
                    latent: e.latent.clone(),
                    features: camera_features(&e.pose_set, &self.window_origin, &self.embedder)?,
                });
            }
        }
        let short_start = self.short_term.front().map(|e| e.frame_range.start);
        if let Some(start) = short_start {
            let overlapping = self.long_term.iter().filter(|e| e.frame_range.end > start).count();
            self.audit.overlap_violations += overlapping as u64;
        }
        self.epoch += 1;
        self.conditioning = Conditioning {
            epoch: self.epoch,
            window_origin: self.window_origin,
            items,
        };
        self.dirty = false;
        Ok(())
    }

    /// Runs `N/S` denoiser steps on every slot.
    pub fn advance_stage<D: Denoiser + ?Sized>(&mut self, d: &mut D) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::InvalidState("no progressive latents to advance".into()));
        }
        if self.dirty {
            self.rebuild()?;
        }
        let n = self.schedule.steps();
        let per = self.schedule.steps_per_stage();
        if let Some(s) = self.slots.iter().find(|s| s.steps_done + per > n) {
            return Err(Error::InvalidState(format!(
                "latent {} would exceed {n} steps; emit it first",
                s.latent_index
            )));
        }
        for (i, slot) in self.slots.iter_mut().enumerate() {
            for _ in 0..per {
                let target = StepTarget {
                    slot: i,
                    latent_index: slot.latent_index,
                    frames: &slot.frames,
                    global_poses: &slot.poses,
                    relative_poses: &slot.relative,
                    features: &slot.features,
                };
                let from = self.schedule.sigma(slot.steps_done);
                let to = self.schedule.sigma(slot.steps_done + 1);
                let next = d
                    .step(&target, &slot.latent, from, to, &self.conditioning)
                    .map_err(|e| Error::Denoiser {
                        slot: i,
                        message: e.to_string(),
                    })?;
                if !next.same_shape(&slot.latent) {
                    return Err(Error::Denoiser {
                        slot: i,
                        message: "denoiser changed the latent shape".into(),
                    });
                }
                slot.latent = next;
                slot.steps_done += 1;
            }
        }
        self.audit.stage_advances += 1;
        self.audit.monotonicity_checks += 1;
        let levels = self.noise_levels();
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            self.audit.monotonicity_violations += 1;
        }
        let context = self.conditioning.items.len() + self.slots.len();
        self.audit.max_context = self.audit.max_context.max(context);
        Ok(())
    }

    /// Budget `|sink| + |short_term| + L + S`.
    pub fn context_budget(&self) -> usize {
        self.cfg.sink_size + self.cfg.short_term + self.cfg.long_term + self.schedule.stages()
    }

    /// One action-paced generation step: append, advance, and emit whatever
    /// completed.
    pub fn feed<D: Denoiser + ?Sized>(&mut self, d: &mut D, poses: Vec<Pose>) -> Result<Option<Emission>> {
        self.append(d, poses)?;
        self.advance_stage(d)?;
        self.emit_completed(d)
    }

    fn emit_completed<D: Denoiser + ?Sized>(&mut self, d: &mut D) -> Result<Option<Emission>> {
        let n = self.schedule.steps();
        if self.slots.front().is_some_and(|s| s.steps_done == n) {
            return self.evict(d).map(Some);
        }
        Ok(None)
    }

    /// Finishes every latent still in the window.
    pub fn drain<D: Denoiser + ?Sized>(&mut self, d: &mut D) -> Result<Vec<Emission>> {
        let mut out = Vec::new();
        while !self.slots.is_empty() {
            self.advance_stage(d)?;
            if let Some(e) = self.emit_completed(d)? {
                out.push(e);
            }
        }
        Ok(out)
    }
}
