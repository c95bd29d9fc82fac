use std::fmt::Write as _;

use crate::action::{InputState, KeySet};
use crate::error::{Error, Result};

/// One action script line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptLine {
    pub frame_index: u64,
    pub input: InputState,
}

/// Parses `frame_index keys=<set> dx=<int> dy=<int> dt=<float>` lines.
/// Blank lines and `#` comments are skipped.
pub fn parse_action_script(text: &str) -> Result<Vec<ScriptLine>> {
    let mut out: Vec<ScriptLine> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let index = fields.next().expect("non-empty line");
        let frame_index: u64 = index
            .parse()
            .map_err(|_| Error::parse_line(line, format!("bad frame index {index:?}")))?;
        let (mut keys, mut dx, mut dy, mut dt) = (None, None, None, None);
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::parse_line(line, format!("expected key=value, got {f:?}")))?;
            let bad = || Error::parse_line(line, format!("bad value {v:?} for {k}"));
            match k {
                "keys" => keys = Some(v.parse::<KeySet>().map_err(|_| bad())?),
                "dx" => dx = Some(v.parse::<i64>().map_err(|_| bad())?),
                "dy" => dy = Some(v.parse::<i64>().map_err(|_| bad())?),
                "dt" => dt = Some(v.parse::<f64>().map_err(|_| bad())?),
                other => return Err(Error::parse_line(line, format!("unknown field {other:?}"))),
            }
        }
        let missing = |name: &str| Error::parse_line(line, format!("missing {name}"));
        let input = InputState {
            keys: keys.ok_or_else(|| missing("keys"))?,
            mouse_dx: dx.ok_or_else(|| missing("dx"))? as f64,
            mouse_dy: dy.ok_or_else(|| missing("dy"))? as f64,
            dt: dt.ok_or_else(|| missing("dt"))?,
        };
        input.validate().map_err(|e| Error::parse_line(line, e.to_string()))?;
        if let Some(prev) = out.last() {
            if frame_index <= prev.frame_index {
                return Err(Error::parse_line(line, "frame indices must increase"));
            }
        }
        out.push(ScriptLine { frame_index, input });
    }
    Ok(out)
}

/// Writes a script; mouse deltas are rounded to whole pixels.
pub fn write_action_script(lines: &[ScriptLine]) -> String {
    let mut out = String::new();
    for l in lines {
        let keys = if l.input.keys.is_empty() { "-".to_string() } else { l.input.keys.to_string() };
        let _ = writeln!(
            out,
            "{} keys={} dx={} dy={} dt={}",
            l.frame_index,
            keys,
            l.input.mouse_dx.round() as i64,
            l.input.mouse_dy.round() as i64,
            l.input.dt
        );
    }
    out
}
