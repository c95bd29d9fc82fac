//! Recorded sessions as JSON lines: one header, then one line per action and
//! one per frame digest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trajectory::{pose_from_array, pose_to_array};
use crate::action::InputState;
use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::rollout::{ActionRecord, FrameOutput};
use crate::se3::{Pose, Trajectory, Twist};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub engine_version: String,
    pub frame_interval: f64,
    /// Config file text.
    pub config: String,
    pub initial_pose: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordLine {
    Header(RecordHeader),
    Action {
        frame_index: u64,
        keys: String,
        dx: f64,
        dy: f64,
        dt: f64,
        twist: [f64; 6],
        relative: [f64; 7],
        global: [f64; 7],
    },
    Digest {
        frame_index: u64,
        digest: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSession {
    pub header: RecordHeader,
    pub actions: Vec<ActionRecord>,
    /// `(frame index, SHA-256 of the RGB bytes)`
    pub digests: Vec<(u64, String)>,
}

impl RecordedSession {
    pub fn new(cfg: &SessionConfig, initial_pose: &Pose, actions: &[ActionRecord], frames: &[FrameOutput]) -> Self {
        Self {
            header: RecordHeader {
                engine_version: ENGINE_VERSION.to_string(),
                frame_interval: cfg.frame_interval,
                config: cfg.to_text(),
                initial_pose: pose_to_array(initial_pose),
            },
            actions: actions.to_vec(),
            digests: frames.iter().map(|f| (f.index, f.image.digest())).collect(),
        }
    }

    pub fn config(&self) -> Result<SessionConfig> {
        SessionConfig::parse(&self.header.config)
    }

    pub fn initial_pose(&self) -> Result<Pose> {
        pose_from_array(&self.header.initial_pose)
    }

    pub fn inputs(&self) -> Vec<InputState> {
        self.actions.iter().map(|a| a.input).collect()
    }

    /// Global pose of every recorded action frame.
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_poses(self.actions.iter().map(|a| a.global).collect(), self.header.frame_interval)
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![RecordLine::Header(self.header.clone())];
        for a in &self.actions {
            lines.push(RecordLine::Action {
                frame_index: a.frame_index,
                keys: a.input.keys.to_string(),
                dx: a.input.mouse_dx,
                dy: a.input.mouse_dy,
                dt: a.input.dt,
                twist: a.twist.to_array(),
                relative: pose_to_array(&a.relative),
                global: pose_to_array(&a.global),
            });
        }
        for (frame_index, digest) in &self.digests {
            lines.push(RecordLine::Digest {
                frame_index: *frame_index,
                digest: digest.clone(),
            });
        }
        let mut out = String::new();
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("plain data serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = None;
        let mut actions = Vec::new();
        let mut digests = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(raw).map_err(|e| Error::parse_line(line, e.to_string()))?;
            let at = |e: Error| Error::parse_line(line, e.to_string());
            match parsed {
                RecordLine::Header(h) => {
                    if header.is_some() {
                        return Err(Error::parse_line(line, "second header"));
                    }
                    header = Some(h);
                }
                _ if header.is_none() => return Err(Error::parse_line(line, "record before header")),
                RecordLine::Action {
                    frame_index,
                    keys,
                    dx,
                    dy,
                    dt,
                    twist,
                    relative,
                    global,
                } => {
                    let input = InputState {
                        keys: keys.parse().map_err(at)?,
                        mouse_dx: dx,
                        mouse_dy: dy,
                        dt,
                    };
                    actions.push(ActionRecord {
                        frame_index,
                        input,
                        twist: Twist::from_array(twist),
                        relative: pose_from_array(&relative).map_err(at)?,
                        global: pose_from_array(&global).map_err(at)?,
                    });
                }
                RecordLine::Digest { frame_index, digest } => digests.push((frame_index, digest)),
            }
        }
        Ok(Self {
            header: header.ok_or_else(|| Error::parse_line(1, "missing header"))?,
            actions,
            digests,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{Key, KeySet};
    use crate::rollout::Session;

    fn small() -> SessionConfig {
        SessionConfig {
            steps: 4,
            stages: 2,
            r: 2,
            width: 16,
            height: 16,
            ..SessionConfig::default()
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let mut s = Session::new(small()).unwrap();
        let mut frames = s.take_frames();
        let a = InputState {
            keys: KeySet::empty().with(Key::W).with(Key::Space),
            mouse_dx: 3.0,
            ..InputState::idle(0.05)
        };
        for _ in 0..5 {
            frames.extend(s.push_action(&a).unwrap());
        }
        frames.extend(s.flush().unwrap());
        let rec = RecordedSession::new(s.config(), s.initial_pose(), s.records(), &frames);
        let back = RecordedSession::parse(&rec.to_jsonl()).unwrap();
        assert_eq!(back.header, rec.header);
        assert_eq!(back.digests, rec.digests);
        assert_eq!(back.inputs(), rec.inputs());
        for (x, y) in back.actions.iter().zip(&rec.actions) {
            assert!(crate::se3::pose_distance(&x.global, &y.global) < 1e-12);
        }
        assert_eq!(back.config().unwrap(), small());
    }

    #[test]
    fn parse_errors_name_lines() {
        assert!(RecordedSession::parse("").is_err());
        let h = serde_json::to_string(&RecordLine::Header(RecordHeader {
            engine_version: "x".into(),
            frame_interval: 0.05,
            config: String::new(),
            initial_pose: [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }))
        .unwrap();
        match RecordedSession::parse(&format!("{h}\n{{\"kind\":\"bogus\"}}\n")) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, crate::error::Location::Line(2)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
