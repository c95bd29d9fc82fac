//! Pose-anchored long-term memory.
//!
//! Every generated latent is stored with the global poses of the frames it
//! covers. Retrieval is hierarchical: the `K` entries whose anchor positions
//! are nearest the query position, then the `L` of those whose orientation is
//! best aligned with the query orientation, scored by `tr(R_anchorᵀ R_query)`.

use std::cmp::Ordering;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::se3::{compose, Pose, Trajectory};
use crate::world::ToyLatent;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub id: u64,
    /// Global pose of each frame the latent covers, in frame order.
    pub pose_set: Vec<Pose>,
    pub latent: ToyLatent,
    /// Global frame indices `[start, end)`.
    pub frame_range: Range<u64>,
}

impl MemoryEntry {
    /// Retrieval key: the pose of the last frame.
    pub fn anchor(&self) -> &Pose {
        self.pose_set.last().expect("entries always carry poses")
    }
}

/// Translation distance used by stage one.
pub fn translation_distance(anchor: &Pose, query: &Pose) -> f64 {
    (anchor.translation - query.translation).norm()
}

/// Orientation alignment used by stage two, in `[-1, 3]`.
pub fn rotation_trace(anchor: &Pose, query: &Pose) -> f64 {
    (anchor.rotation.transpose() * query.rotation).trace()
}

/// Append-only pool; ids strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryPool {
    entries: Vec<MemoryEntry>,
    /// How many of the most recent entries are hidden from retrieval.
    pub exclusion_horizon: usize,
}

impl MemoryPool {
    pub fn new(exclusion_horizon: usize) -> Self {
        Self {
            entries: Vec::new(),
            exclusion_horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn get(&self, id: u64) -> Option<&MemoryEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn next_id(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.id + 1)
    }

    /// Entries visible to retrieval.
    pub fn eligible(&self) -> &[MemoryEntry] {
        let n = self.entries.len().saturating_sub(self.exclusion_horizon);
        &self.entries[..n]
    }

    pub fn insert(&mut self, e: MemoryEntry) -> Result<()> {
        if e.pose_set.is_empty() {
            return Err(Error::InvalidArgument("memory entry without poses".into()));
        }
        if let Some(last) = self.entries.last() {
            if e.id <= last.id {
                return Err(Error::InvalidArgument(format!(
                    "memory id {} does not exceed current maximum {}",
                    e.id, last.id
                )));
            }
            if e.pose_set.len() != last.pose_set.len() {
                return Err(Error::Shape(format!(
                    "entry has {} poses, pool entries have {}",
                    e.pose_set.len(),
                    last.pose_set.len()
                )));
            }
            if e.frame_range.start < last.frame_range.end {
                return Err(Error::InvalidArgument(format!(
                    "frame range {:?} overlaps or precedes {:?}",
                    e.frame_range, last.frame_range
                )));
            }
        }
        self.entries.push(e);
        Ok(())
    }

    /// Hierarchical retrieval. Ties go to the smaller id; the result is in
    /// descending rotation-trace order.
    pub fn retrieve(&self, query: &Pose, k: usize, l: usize) -> Result<Vec<&MemoryEntry>> {
        if k == 0 || l > k {
            return Err(Error::InvalidArgument(format!("retrieval needs 1 <= L <= K, got K = {k}, L = {l}")));
        }
        let eligible = self.eligible();
        let mut stage1: Vec<(f64, &MemoryEntry)> = eligible
            .iter()
            .map(|e| (translation_distance(e.anchor(), query), e))
            .collect();
        let by_distance = |a: &(f64, &MemoryEntry), b: &(f64, &MemoryEntry)| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id));
        if stage1.len() > k {
            stage1.select_nth_unstable_by(k - 1, by_distance);
            stage1.truncate(k);
        }
        let mut stage2: Vec<(f64, &MemoryEntry)> = stage1
            .into_iter()
            .map(|(_, e)| (rotation_trace(e.anchor(), query), e))
            .collect();
        stage2.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
        stage2.truncate(l);
        Ok(stage2.into_iter().map(|(_, e)| e).collect())
    }
}

/// A memory entry re-expressed relative to a window origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RealignedEntry {
    pub id: u64,
    pub frame_range: Range<u64>,
    pub poses: Vec<Pose>,
    pub latent: ToyLatent,
}

/// Left-multiplies every pose by `origin⁻¹`; latents are carried unchanged.
pub fn realign_for_window<'a>(entries: impl IntoIterator<Item = &'a MemoryEntry>, window_origin: &Pose) -> Vec<RealignedEntry> {
    let inv = window_origin.inverse();
    entries
        .into_iter()
        .map(|e| RealignedEntry {
            id: e.id,
            frame_range: e.frame_range.clone(),
            poses: e.pose_set.iter().map(|p| compose(&inv, p)).collect(),
            latent: e.latent.clone(),
        })
        .collect()
}

/// Offline memory-clip selection for a training segment.
///
/// Candidates are every `clip_len` window lying entirely outside `segment`,
/// keyed by the pose of their last frame; the query is the segment's last
/// frame. Stage one greedily takes the `4·n_clips` nearest candidates that do
/// not overlap an already-taken one, stage two keeps the `n_clips` best
/// aligned.
pub fn select_offline_clips(traj: &Trajectory, segment: Range<usize>, n_clips: usize, clip_len: usize) -> Result<Vec<Range<usize>>> {
    if segment.start >= segment.end || segment.end > traj.len() {
        return Err(Error::InvalidArgument(format!(
            "segment {segment:?} is not inside a trajectory of {} frames",
            traj.len()
        )));
    }
    if n_clips == 0 || clip_len == 0 {
        return Ok(Vec::new());
    }
    let query = &traj.poses[segment.end - 1];
    let mut candidates: Vec<(f64, usize)> = (0..=traj.len().saturating_sub(clip_len))
        .filter(|&s| s + clip_len <= traj.len())
        .filter(|&s| s + clip_len <= segment.start || s >= segment.end)
        .map(|s| (translation_distance(&traj.poses[s + clip_len - 1], query), s))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let k = 4 * n_clips;
    let mut taken: Vec<usize> = Vec::with_capacity(k);
    for (_, s) in candidates {
        if taken.len() == k {
            break;
        }
        if taken.iter().all(|&t| s + clip_len <= t || t + clip_len <= s) {
            taken.push(s);
        }
    }
    let mut scored: Vec<(f64, usize)> = taken
        .into_iter()
        .map(|s| (rotation_trace(&traj.poses[s + clip_len - 1], query), s))
        .collect();
    scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    Ok(scored.into_iter().take(n_clips).map(|(_, s)| s..s + clip_len).collect())
}
