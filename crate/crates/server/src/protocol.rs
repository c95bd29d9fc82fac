//! JSON messages exchanged over a session stream.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use twistworld::action::{InputState, KeySet};
use twistworld::formats::pose_to_array;
use twistworld::rollout::FrameOutput;
use twistworld::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Action {
        keys: Vec<String>,
        dx: f64,
        dy: f64,
        dt: f64,
    },
    /// Finish every latent in flight; the session then only accepts `reset`.
    Flush,
    Reset,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed message: {e}")))
    }

    pub fn action(input: &InputState) -> Self {
        ClientMessage::Action {
            keys: input.keys.iter().map(|k| k.name().to_string()).collect(),
            dx: input.mouse_dx,
            dy: input.mouse_dy,
            dt: input.dt,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

/// Validated input of an action message.
pub fn input_of(keys: &[String], dx: f64, dy: f64, dt: f64) -> Result<InputState> {
    let keys: KeySet = keys
        .iter()
        .map(|k| k.parse())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let input = InputState {
        keys,
        mouse_dx: dx,
        mouse_dy: dy,
        dt,
    };
    input.validate()?;
    Ok(input)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame {
        index: u64,
        /// `[tx, ty, tz, qw, qx, qy, qz]`
        pose: [f64; 7],
        /// Base64 PNG; empty when the image follows as a binary message.
        png: String,
        retrieved: Vec<u64>,
        step_ms: f64,
    },
    Error {
        code: String,
        detail: String,
    },
}

impl ServerMessage {
    pub fn frame(f: &FrameOutput, inline_png: bool) -> Self {
        ServerMessage::Frame {
            index: f.index,
            pose: pose_to_array(&f.pose),
            png: if inline_png { STANDARD.encode(f.image.to_png()) } else { String::new() },
            retrieved: f.retrieved.clone(),
            step_ms: f.step_ms,
        }
    }

    pub fn error(e: &Error) -> Self {
        ServerMessage::Error {
            code: e.code().to_string(),
            detail: e.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// PNG bytes of an inline frame.
    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        match self {
            ServerMessage::Frame { png, .. } => STANDARD
                .decode(png)
                .map_err(|e| Error::InvalidArgument(format!("bad base64 frame: {e}"))),
            ServerMessage::Error { .. } => Err(Error::InvalidState("not a frame".into())),
        }
    }
}
