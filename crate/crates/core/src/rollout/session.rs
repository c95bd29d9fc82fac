use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use super::denoiser::{Denoiser, ToyDenoiser};
use super::window::{Emission, RolloutWindow, WindowAudit};
use crate::action::{ActionMapper, InputState};
use crate::camera::CameraEmbedder;
use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryEntry;
use crate::se3::{compose, exp_twist, Pose, Twist};
use crate::world::{decode, encode, render_image, Camera, Image, Scene, DEFAULT_BLOCK};

/// One generated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub index: u64,
    pub pose: Pose,
    pub image: Image,
    /// Long-term memory ids conditioning the latent this frame came from.
    pub retrieved: Vec<u64>,
    /// Generation time attributed to this frame, milliseconds.
    pub step_ms: f64,
}

/// What happened to one action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub frame_index: u64,
    pub input: InputState,
    pub twist: Twist,
    pub relative: Pose,
    pub global: Pose,
}

/// A single interactive rollout: actions in, frames out.
pub struct Session {
    cfg: SessionConfig,
    scene: Arc<Scene>,
    camera: Camera,
    embedder: CameraEmbedder,
    initial_pose: Pose,
    mapper: ActionMapper,
    denoiser: Box<dyn Denoiser + Send>,
    window: RolloutWindow,
    pose: Pose,
    next_frame: u64,
    pending: Vec<Pose>,
    records: Vec<ActionRecord>,
    outbox: Vec<FrameOutput>,
    timings: Vec<f64>,
    finished: bool,
    batch_ms: f64,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self> {
        Self::with_initial_pose(cfg, Pose::identity())
    }

    pub fn with_initial_pose(cfg: SessionConfig, initial_pose: Pose) -> Result<Self> {
        cfg.validate()?;
        let (scene, camera, embedder) = Self::parts(&cfg);
        let denoiser = ToyDenoiser::new(scene.clone(), camera, DEFAULT_BLOCK, embedder.clone(), cfg.seed, cfg.drift());
        Self::assemble(cfg, initial_pose, scene, camera, embedder, Box::new(denoiser))
    }

    /// Uses a custom denoiser with the standard scene, camera and embedder.
    pub fn with_denoiser(cfg: SessionConfig, initial_pose: Pose, denoiser: Box<dyn Denoiser + Send>) -> Result<Self> {
        cfg.validate()?;
        let (scene, camera, embedder) = Self::parts(&cfg);
        Self::assemble(cfg, initial_pose, scene, camera, embedder, denoiser)
    }

    fn parts(cfg: &SessionConfig) -> (Arc<Scene>, Camera, CameraEmbedder) {
        let camera = Camera {
            width: cfg.width,
            height: cfg.height,
            fov_deg: cfg.fov,
        };
        let embedder = CameraEmbedder::seeded(cfg.r, cfg.embed_hidden, cfg.embed_features, cfg.seed);
        (Arc::new(Scene::generate(cfg.scene_seed)), camera, embedder)
    }

    fn assemble(
        cfg: SessionConfig,
        initial_pose: Pose,
        scene: Arc<Scene>,
        camera: Camera,
        embedder: CameraEmbedder,
        denoiser: Box<dyn Denoiser + Send>,
    ) -> Result<Self> {
        initial_pose.validate(1e-9)?;
        let window = RolloutWindow::new(cfg.schedule()?, cfg.window, embedder.clone(), cfg.seed, cfg.latent_shape())?;
        let mut s = Self {
            mapper: ActionMapper::new(cfg.sensitivity)?,
            cfg,
            scene,
            camera,
            embedder,
            initial_pose,
            denoiser,
            window,
            pose: initial_pose,
            next_frame: 0,
            pending: Vec::new(),
            records: Vec::new(),
            outbox: Vec::new(),
            timings: Vec::new(),
            finished: false,
            batch_ms: 0.0,
        };
        s.start()?;
        Ok(s)
    }

    fn start(&mut self) -> Result<()> {
        let started = Instant::now();
        let r = self.cfg.r;
        let count = self.cfg.window.sink_size.max(1);
        let image = render_image(&self.scene, &self.initial_pose, &self.camera);
        let latent = encode(&vec![image; r], r, DEFAULT_BLOCK)?;
        let entries: Vec<MemoryEntry> = (0..count as u64)
            .map(|id| MemoryEntry {
                id,
                pose_set: vec![self.initial_pose; r],
                latent: latent.clone(),
                frame_range: id * r as u64..(id + 1) * r as u64,
            })
            .collect();
        self.next_frame = count as u64 * r as u64;
        self.window.attach_sink(entries.clone())?;
        self.batch_ms = started.elapsed().as_secs_f64() * 1e3;
        for e in &entries {
            self.emit(e, &[])?;
        }
        Ok(())
    }

    fn emit(&mut self, entry: &MemoryEntry, retrieved: &[u64]) -> Result<()> {
        let started = Instant::now();
        let images = decode(&entry.latent, DEFAULT_BLOCK)?;
        let ms = (self.batch_ms + started.elapsed().as_secs_f64() * 1e3) / images.len() as f64;
        for (k, image) in images.into_iter().enumerate() {
            self.timings.push(ms);
            self.outbox.push(FrameOutput {
                index: entry.frame_range.start + k as u64,
                pose: entry.pose_set[k],
                image,
                retrieved: retrieved.to_vec(),
                step_ms: ms,
            });
        }
        self.batch_ms = 0.0;
        Ok(())
    }

    fn emit_emission(&mut self, e: &Emission) -> Result<()> {
        self.emit(&e.entry, &e.retrieved)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn embedder(&self) -> &CameraEmbedder {
        &self.embedder
    }

    pub fn window(&self) -> &RolloutWindow {
        &self.window
    }

    pub fn audit(&self) -> &WindowAudit {
        self.window.audit()
    }

    /// Current global camera pose.
    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn initial_pose(&self) -> &Pose {
        &self.initial_pose
    }

    pub fn records(&self) -> &[ActionRecord] {
        &self.records
    }

    /// Per-frame generation times of every frame produced so far.
    pub fn timings(&self) -> &[f64] {
        &self.timings
    }

    /// Index the next action's frame will get.
    pub fn next_frame_index(&self) -> u64 {
        self.next_frame
    }

    /// Frames produced but not yet taken.
    pub fn take_frames(&mut self) -> Vec<FrameOutput> {
        std::mem::take(&mut self.outbox)
    }

    /// Maps one action to a new camera pose; every `r` actions one latent
    /// enters the window and the window advances one stage.
    pub fn push_action(&mut self, input: &InputState) -> Result<Vec<FrameOutput>> {
        if self.finished {
            return Err(Error::InvalidState("session was flushed; reset it first".into()));
        }
        let started = Instant::now();
        let twist = self.mapper.map(input)?;
        let relative = exp_twist(&twist)?;
        self.pose = compose(&self.pose, &relative);
        self.records.push(ActionRecord {
            frame_index: self.next_frame,
            input: *input,
            twist,
            relative,
            global: self.pose,
        });
        self.next_frame += 1;
        self.pending.push(self.pose);
        let mut elapsed = started.elapsed().as_secs_f64() * 1e3;
        if self.pending.len() == self.cfg.r {
            let t = Instant::now();
            let poses = std::mem::take(&mut self.pending);
            let emission = self.window.feed(self.denoiser.as_mut(), poses)?;
            elapsed += t.elapsed().as_secs_f64() * 1e3;
            self.batch_ms += elapsed;
            if let Some(e) = emission {
                self.emit_emission(&e)?;
            }
        } else {
            self.batch_ms += elapsed;
        }
        Ok(self.take_frames())
    }

    /// Finishes every latent in flight and ends the session; call
    /// [`Session::reset`] to start over. A partial latent is completed by
    /// holding the last pose, and those padding frames are not returned.
    pub fn flush(&mut self) -> Result<Vec<FrameOutput>> {
        if self.finished {
            return Ok(self.take_frames());
        }
        self.finished = true;
        if let Some(&last) = self.pending.last() {
            let t = Instant::now();
            let mut poses = std::mem::take(&mut self.pending);
            poses.resize(self.cfg.r, last);
            let emission = self.window.feed(self.denoiser.as_mut(), poses)?;
            self.batch_ms += t.elapsed().as_secs_f64() * 1e3;
            if let Some(e) = emission {
                self.emit_emission(&e)?;
            }
        }
        let t = Instant::now();
        let rest = self.window.drain(self.denoiser.as_mut())?;
        let per = t.elapsed().as_secs_f64() * 1e3 / rest.len().max(1) as f64;
        for e in &rest {
            self.batch_ms += per;
            self.emit_emission(e)?;
        }
        let end = self.next_frame;
        self.outbox.retain(|f| f.index < end);
        Ok(self.take_frames())
    }

    /// Restarts from the initial pose with an empty memory.
    pub fn reset(&mut self) -> Result<()> {
        let cfg = self.cfg.clone();
        self.window = RolloutWindow::new(cfg.schedule()?, cfg.window, self.embedder.clone(), cfg.seed, cfg.latent_shape())?;
        self.denoiser = Box::new(ToyDenoiser::new(
            self.scene.clone(),
            self.camera,
            DEFAULT_BLOCK,
            self.embedder.clone(),
            cfg.seed,
            cfg.drift(),
        ));
        self.mapper.reset();
        self.pose = self.initial_pose;
        self.pending.clear();
        self.records.clear();
        self.outbox.clear();
        self.timings.clear();
        self.finished = false;
        self.batch_ms = 0.0;
        self.start()
    }
}

/// Items of a session's output stream.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Frame(FrameOutput),
    Error { code: String, detail: String },
    End,
}

impl SessionEvent {
    pub fn from_error(e: &Error) -> Self {
        SessionEvent::Error {
            code: e.code().to_string(),
            detail: e.to_string(),
        }
    }
}

/// Runs a session over `actions` on its own thread. The stream holds at most
/// `high_water` undelivered events; generation waits when it is full. Errors
/// end the stream with an [`SessionEvent::Error`].
pub fn run_session<I>(cfg: SessionConfig, initial_pose: Pose, actions: I) -> Receiver<SessionEvent>
where
    I: IntoIterator<Item = InputState> + Send + 'static,
{
    let (tx, rx) = sync_channel(cfg.high_water.max(1));
    thread::spawn(move || {
        let run = || -> Result<()> {
            let mut s = Session::with_initial_pose(cfg, initial_pose)?;
            for f in s.take_frames() {
                if tx.send(SessionEvent::Frame(f)).is_err() {
                    return Ok(());
                }
            }
            for a in actions {
                for f in s.push_action(&a)? {
                    if tx.send(SessionEvent::Frame(f)).is_err() {
                        return Ok(());
                    }
                }
            }
            for f in s.flush()? {
                if tx.send(SessionEvent::Frame(f)).is_err() {
                    return Ok(());
                }
            }
            Ok(())
        };
        let last = match run() {
            Ok(()) => SessionEvent::End,
            Err(e) => SessionEvent::from_error(&e),
        };
        let _ = tx.send(last);
    });
    rx
}
