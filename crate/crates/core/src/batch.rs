//! Whole-run helpers behind the command line: scripted rollouts and their
//! output directory, trajectory evaluation, record segmentation and replay.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::action::{InputState, Key, KeySet};
use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::eval::{compute_errors, compute_errors_unaligned, Sim3, TrajectoryErrors};
use crate::formats::{RecordedSession, ScriptLine, TrajectoryFile};
use crate::memory::select_offline_clips;
use crate::rollout::{ActionRecord, FrameOutput, Session, WindowAudit};
use crate::se3::{Pose, Trajectory};
use crate::world::psnr;

/// A closed square loop driven out and back: per side `leg` forward steps
/// then `turn_steps` yaw steps of `dx` pixels, then the whole path reversed
/// with S and the opposite mouse motion. Every frame `i` of the outward half
/// shares its pose with frame `len - i`.
pub fn square_loop(leg: usize, turn_steps: usize, dx: f64, dt: f64) -> Vec<InputState> {
    let forward = InputState {
        keys: KeySet::empty().with(Key::W),
        ..InputState::idle(dt)
    };
    let turn = InputState {
        mouse_dx: dx,
        ..InputState::idle(dt)
    };
    let mut out = Vec::with_capacity(8 * (leg + turn_steps));
    for _ in 0..4 {
        out.extend(std::iter::repeat_n(forward, leg));
        out.extend(std::iter::repeat_n(turn, turn_steps));
    }
    let back: Vec<_> = out
        .iter()
        .rev()
        .map(|a| {
            if a.keys.is_empty() {
                InputState { mouse_dx: -a.mouse_dx, ..*a }
            } else {
                InputState {
                    keys: KeySet::empty().with(Key::S),
                    ..*a
                }
            }
        })
        .collect();
    out.extend(back);
    out
}

/// The 200-action loop used for memory ablations: 20 steps per side and a
/// quarter turn at each corner under the default sensitivity.
pub fn reference_square_loop() -> Vec<InputState> {
    square_loop(20, 5, 126.0, 0.05)
}

pub fn script_lines(inputs: &[InputState]) -> Vec<ScriptLine> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, &input)| ScriptLine {
            frame_index: i as u64,
            input,
        })
        .collect()
}

/// Everything one scripted rollout produced.
#[derive(Debug, Clone)]
pub struct RolloutRun {
    pub config: SessionConfig,
    pub initial_pose: Pose,
    /// Warmup frames first, then one frame per action.
    pub frames: Vec<FrameOutput>,
    pub warmup: usize,
    pub records: Vec<ActionRecord>,
    pub audit: WindowAudit,
}

pub fn run_rollout(cfg: &SessionConfig, initial_pose: Pose, inputs: &[InputState]) -> Result<RolloutRun> {
    let mut s = Session::with_initial_pose(cfg.clone(), initial_pose)?;
    let mut frames = s.take_frames();
    let warmup = frames.len();
    for a in inputs {
        frames.extend(s.push_action(a)?);
    }
    frames.extend(s.flush()?);
    Ok(RolloutRun {
        config: cfg.clone(),
        initial_pose,
        frames,
        warmup,
        records: s.records().to_vec(),
        audit: s.audit().clone(),
    })
}

impl RolloutRun {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_poses(self.frames.iter().map(|f| f.pose).collect(), self.config.frame_interval)
    }

    pub fn digests(&self) -> Vec<(u64, String)> {
        self.frames.iter().map(|f| (f.index, f.image.digest())).collect()
    }

    pub fn record(&self) -> RecordedSession {
        RecordedSession::new(&self.config, &self.initial_pose, &self.records, &self.frames)
    }

    pub fn timing(&self) -> TimingReport {
        TimingReport::new(&self.frames, self.warmup, self.config.r)
    }

    /// Mean PSNR over the pairs `(base + i, base + n - i)`, `i < n / 2`,
    /// where `base` is the last warmup frame and `n` the action count.
    pub fn palindrome_psnr(&self) -> Result<f64> {
        palindrome_psnr(&self.frames, self.warmup.saturating_sub(1), self.records.len())
    }
}

pub fn palindrome_psnr(frames: &[FrameOutput], base: usize, n: usize) -> Result<f64> {
    if n < 2 || base + n >= frames.len() {
        return Err(Error::InvalidArgument(format!(
            "palindrome of {n} frames from {base} needs more than the {} available",
            frames.len()
        )));
    }
    let pairs = n / 2;
    let mut acc = 0.0;
    for i in 0..pairs {
        acc += psnr(&frames[base + i].image, &frames[base + n - i].image)?;
    }
    Ok(acc / pairs as f64)
}

/// Per-frame generation times. Steady state leaves out the warmup frames and
/// the first generated latent, which carries the pipeline fill.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub frames: usize,
    pub steady_frames: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl TimingReport {
    pub fn new(frames: &[FrameOutput], warmup: usize, r: usize) -> Self {
        let skip = (warmup + r).min(frames.len());
        let mut ms: Vec<f64> = frames[skip..].iter().map(|f| f.step_ms).collect();
        ms.sort_by(f64::total_cmp);
        Self {
            frames: frames.len(),
            steady_frames: ms.len(),
            median_ms: quantile(&ms, 0.5),
            mean_ms: if ms.is_empty() { 0.0 } else { ms.iter().sum::<f64>() / ms.len() as f64 },
            p95_ms: quantile(&ms, 0.95),
            max_ms: ms.last().copied().unwrap_or(0.0),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "frames={}\nsteady_frames={}\nmedian_ms={:.6}\nmean_ms={:.6}\np95_ms={:.6}\nmax_ms={:.6}\n",
            self.frames, self.steady_frames, self.median_ms, self.mean_ms, self.p95_ms, self.max_ms
        )
    }
}

/// Files written by [`write_rollout_dir`], relative to the output directory.
pub const FRAMES_DIR: &str = "frames";
pub const TRAJECTORY_FILE: &str = "trajectory.camtraj";
pub const TIMING_FILE: &str = "timing.txt";
pub const RETRIEVAL_LOG: &str = "retrieval.log";
pub const DIGESTS_FILE: &str = "digests.txt";
pub const RECORD_FILE: &str = "record.jsonl";

pub fn digests_text(digests: &[(u64, String)]) -> String {
    let mut out = String::new();
    for (i, d) in digests {
        let _ = writeln!(out, "{i} {d}");
    }
    out
}

/// Writes PNG frames, the trajectory, a timing report, the retrieval log,
/// frame digests and the session record.
pub fn write_rollout_dir(run: &RolloutRun, out: &Path) -> Result<()> {
    let frames_dir = out.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir)?;
    for f in &run.frames {
        fs::write(frames_dir.join(format!("{:06}.png", f.index)), f.image.to_png())?;
    }
    let first = run.frames.first().map_or(0, |f| f.index);
    TrajectoryFile::from_trajectory(&run.trajectory()?, first).save(out.join(TRAJECTORY_FILE))?;
    fs::write(out.join(TIMING_FILE), run.timing().to_text())?;
    let mut log = String::new();
    for f in &run.frames {
        let ids: Vec<String> = f.retrieved.iter().map(u64::to_string).collect();
        let _ = writeln!(log, "{} {}", f.index, ids.join(","));
    }
    fs::write(out.join(RETRIEVAL_LOG), log)?;
    fs::write(out.join(DIGESTS_FILE), digests_text(&run.digests()))?;
    run.record().save(out.join(RECORD_FILE))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub errors: TrajectoryErrors,
    /// `None` when the reference positions cannot pin down a similarity.
    pub alignment: Option<Sim3>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alignment {
            Some(s) => writeln!(f, "alignment: sim3 scale={:.9}", s.scale)?,
            None => writeln!(f, "alignment: none (degenerate reference)")?,
        }
        write!(f, "{}", self.errors)
    }
}

pub fn evaluate(est: &Trajectory, reference: &Trajectory, delta: usize) -> Result<EvalReport> {
    match compute_errors(est, reference, delta) {
        Ok((errors, sim)) => Ok(EvalReport {
            errors,
            alignment: Some(sim),
        }),
        Err(Error::Degenerate(_)) => Ok(EvalReport {
            errors: compute_errors_unaligned(est, reference, delta)?,
            alignment: None,
        }),
        Err(e) => Err(e),
    }
}

pub fn eval_files(est: &Path, reference: &Path, delta: usize) -> Result<EvalReport> {
    let est = TrajectoryFile::load(est)?.trajectory()?;
    let reference = TrajectoryFile::load(reference)?.trajectory()?;
    evaluate(&est, &reference, delta)
}

/// One training window of a recording and the memory clips chosen for it.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWindow {
    pub frames: Range<usize>,
    pub clips: Vec<Range<usize>>,
}

/// Cuts `traj` into consecutive non-overlapping windows of `window` frames
/// (a short tail is dropped) and selects memory clips for each.
pub fn segment_trajectory(traj: &Trajectory, window: usize, n_clips: usize, clip_len: usize) -> Result<Vec<SegmentWindow>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1 frame".into()));
    }
    (0..traj.len() / window)
        .map(|w| {
            let frames = w * window..(w + 1) * window;
            let clips = select_offline_clips(traj, frames.clone(), n_clips, clip_len)?;
            Ok(SegmentWindow { frames, clips })
        })
        .collect()
}

pub fn segment_record(record: &RecordedSession, window: usize, n_clips: usize, clip_len: usize) -> Result<Vec<SegmentWindow>> {
    segment_trajectory(&record.trajectory()?, window, n_clips, clip_len)
}

pub fn segments_text(windows: &[SegmentWindow]) -> String {
    let mut out = String::from("window start end clips\n");
    for (i, w) in windows.iter().enumerate() {
        let clips: Vec<String> = w.clips.iter().map(|c| format!("{}..{}", c.start, c.end)).collect();
        let _ = writeln!(out, "{i} {} {} {}", w.frames.start, w.frames.end, clips.join(","));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub checked: usize,
    /// Frame indices whose digest differs or that were not reproduced.
    pub mismatches: Vec<u64>,
    pub run: RolloutRun,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl PartialEq for RolloutRun {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.frames == other.frames && self.records == other.records
    }
}

/// Re-runs a record's inputs and compares frame digests with the stored ones.
pub fn replay(record: &RecordedSession) -> Result<ReplayReport> {
    if record.header.engine_version != crate::formats::ENGINE_VERSION {
        log::warn!(
            "record from engine {} replayed on {}",
            record.header.engine_version,
            crate::formats::ENGINE_VERSION
        );
    }
    let run = run_rollout(&record.config()?, record.initial_pose()?, &record.inputs())?;
    let produced: std::collections::HashMap<u64, String> = run.digests().into_iter().collect();
    let mismatches = record
        .digests
        .iter()
        .filter(|(i, d)| produced.get(i) != Some(d))
        .map(|(i, _)| *i)
        .collect();
    Ok(ReplayReport {
        checked: record.digests.len(),
        mismatches,
        run,
    })
}
