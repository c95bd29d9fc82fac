use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::se3::{Pose, Trajectory};

pub const TRAJECTORY_HEADER: &str = "#camtraj v1";

/// `[tx, ty, tz, qw, qx, qy, qz]` with `qw ≥ 0`.
pub fn pose_to_array(p: &Pose) -> [f64; 7] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(p.rotation));
    let mut q = q.into_inner();
    if q.w < 0.0 {
        q = -q;
    }
    [p.translation.x, p.translation.y, p.translation.z, q.w, q.i, q.j, q.k]
}

/// Inverse of [`pose_to_array`]; the quaternion is normalized first.
pub fn pose_from_array(a: &[f64; 7]) -> Result<Pose> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("pose contains non-finite values".into()));
    }
    let q = Quaternion::new(a[3], a[4], a[5], a[6]);
    if q.norm() < 1e-12 {
        return Err(Error::InvalidArgument("zero quaternion".into()));
    }
    let rot = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    Ok(Pose::new(rot, Vector3::new(a[0], a[1], a[2])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub frame_index: u64,
    pub ts: f64,
    pub pose: Pose,
}

/// A trajectory file: one record per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub frame_interval: f64,
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryFile {
    /// Frames numbered from `first_index`, timestamps `index · frame_interval`.
    pub fn from_trajectory(t: &Trajectory, first_index: u64) -> Self {
        let records = t
            .poses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let frame_index = first_index + i as u64;
                TrajectoryRecord {
                    frame_index,
                    ts: frame_index as f64 * t.frame_interval,
                    pose: *p,
                }
            })
            .collect();
        Self {
            frame_interval: t.frame_interval,
            records,
        }
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_poses(self.records.iter().map(|r| r.pose).collect(), self.frame_interval)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{TRAJECTORY_HEADER} frame_interval={}\n", self.frame_interval);
        for r in &self.records {
            let a = pose_to_array(&r.pose);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {}",
                r.frame_index, r.ts, a[0], a[1], a[2], a[3], a[4], a[5], a[6]
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::parse_line(1, "empty trajectory file"))?;
        let frame_interval = parse_header(header)?;
        let mut records: Vec<TrajectoryRecord> = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 9 {
                return Err(Error::parse_line(line, format!("expected 9 fields, got {}", fields.len())));
            }
            let frame_index: u64 = fields[0]
                .parse()
                .map_err(|_| Error::parse_line(line, format!("bad frame index {:?}", fields[0])))?;
            let mut v = [0.0; 8];
            for (k, f) in fields[1..].iter().enumerate() {
                v[k] = f.parse().map_err(|_| Error::parse_line(line, format!("bad number {f:?}")))?;
            }
            let pose = pose_from_array(&[v[1], v[2], v[3], v[4], v[5], v[6], v[7]])
                .map_err(|e| Error::parse_line(line, e.to_string()))?;
            if let Some(prev) = records.last() {
                if frame_index <= prev.frame_index {
                    return Err(Error::parse_line(line, "frame indices must increase"));
                }
            }
            records.push(TrajectoryRecord {
                frame_index,
                ts: v[0],
                pose,
            });
        }
        Ok(Self {
            frame_interval,
            records,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(header: &str) -> Result<f64> {
    let rest = header
        .trim()
        .strip_prefix(TRAJECTORY_HEADER)
        .ok_or_else(|| Error::parse_line(1, format!("expected header {TRAJECTORY_HEADER:?}")))?;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("frame_interval=") {
            let fi: f64 = v
                .parse()
                .map_err(|_| Error::parse_line(1, format!("bad frame_interval {v:?}")))?;
            if !(fi > 0.0 && fi.is_finite()) {
                return Err(Error::parse_line(1, "frame_interval must be positive"));
            }
            return Ok(fi);
        }
    }
    Err(Error::parse_line(1, "header lacks frame_interval"))
}
