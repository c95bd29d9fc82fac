//! Raw keyboard/mouse state to twist vectors.
//!
//! Movement keys produce body-frame linear velocity, mouse deltas produce
//! yaw (about camera +y) and pitch (about camera +x). Images are rendered with
//! camera +x towards the right edge of the frame and +y towards the top, so D
//! strafes right, positive `mouse_dx` turns right and positive `mouse_dy`
//! (mouse moved down) tilts the view down. Roll is never produced.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::Twist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Key {
    W,
    A,
    S,
    D,
    Space,
    Ctrl,
}

impl Key {
    pub const ALL: [Key; 6] = [Key::W, Key::A, Key::S, Key::D, Key::Space, Key::Ctrl];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Key::W => "W",
            Key::A => "A",
            Key::S => "S",
            Key::D => "D",
            Key::Space => "Space",
            Key::Ctrl => "Ctrl",
        }
    }
}

impl FromStr for Key {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "W" | "w" => Key::W,
            "A" | "a" => Key::A,
            "S" | "s" => Key::S,
            "D" | "d" => Key::D,
            "Space" | "space" | " " => Key::Space,
            "Ctrl" | "ctrl" | "Control" => Key::Ctrl,
            other => return Err(Error::InvalidArgument(format!("unknown key {other:?}"))),
        })
    }
}

/// Set of held keys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct KeySet(u8);

impl KeySet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn with(mut self, k: Key) -> Self {
        self.insert(k);
        self
    }

    pub fn insert(&mut self, k: Key) {
        self.0 |= k.bit();
    }

    pub fn contains(&self, k: Key) -> bool {
        self.0 & k.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Key> + '_ {
        Key::ALL.into_iter().filter(|k| self.contains(*k))
    }

    fn axis(&self, pos: Key, neg: Key) -> f64 {
        (self.contains(pos) as i8 - self.contains(neg) as i8) as f64
    }
}

impl FromIterator<Key> for KeySet {
    fn from_iter<I: IntoIterator<Item = Key>>(iter: I) -> Self {
        iter.into_iter().fold(KeySet::empty(), KeySet::with)
    }
}

/// Compact text form: WASD letters concatenated, then `+Space` / `+Ctrl`.
impl fmt::Display for KeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut letters = String::new();
        let mut extra = Vec::new();
        for k in self.iter() {
            match k {
                Key::Space | Key::Ctrl => extra.push(k.name()),
                _ => letters.push_str(k.name()),
            }
        }
        let mut parts: Vec<&str> = Vec::new();
        if !letters.is_empty() {
            parts.push(&letters);
        }
        parts.extend(extra);
        write!(f, "{}", parts.join("+"))
    }
}

impl FromStr for KeySet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut set = KeySet::empty();
        if s.is_empty() || s == "-" {
            return Ok(set);
        }
        for part in s.split('+') {
            if let Ok(k) = part.parse::<Key>() {
                set.insert(k);
                continue;
            }
            for c in part.chars() {
                set.insert(c.to_string().parse()?);
            }
        }
        Ok(set)
    }
}

/// One sampled input: held keys, mouse motion since the previous sample, and
/// the elapsed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputState {
    pub keys: KeySet,
    pub mouse_dx: f64,
    pub mouse_dy: f64,
    pub dt: f64,
}

impl InputState {
    pub fn idle(dt: f64) -> Self {
        Self {
            keys: KeySet::empty(),
            mouse_dx: 0.0,
            mouse_dy: 0.0,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if !(self.mouse_dx.is_finite() && self.mouse_dy.is_finite()) {
            return Err(Error::InvalidArgument("mouse deltas must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// World units per second per held movement key.
    pub move_speed: f64,
    /// Radians per pixel of horizontal mouse motion.
    pub yaw_rate: f64,
    /// Radians per pixel of vertical mouse motion.
    pub pitch_rate: f64,
    /// Bound on |accumulated pitch|, radians.
    pub pitch_limit: f64,
}

impl Default for Sensitivity {
    fn default() -> Self {
        Self {
            move_speed: 2.0,
            yaw_rate: 0.0025,
            pitch_rate: 0.0025,
            pitch_limit: 1.4,
        }
    }
}

impl Sensitivity {
    pub fn validate(&self) -> Result<()> {
        let all = [self.move_speed, self.yaw_rate, self.pitch_rate, self.pitch_limit];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidArgument("sensitivities must be positive and finite".into()));
        }
        if self.pitch_limit > std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidArgument("pitch_limit must not exceed pi/2".into()));
        }
        Ok(())
    }
}

/// Maps one input sample to a twist. `current_pitch` is the pitch accumulated
/// so far; the returned pitch rate is clamped so the sum stays inside
/// `±pitch_limit`.
pub fn input_to_twist(s: &InputState, cfg: &Sensitivity, current_pitch: f64) -> Result<Twist> {
    s.validate()?;
    if current_pitch.abs() > cfg.pitch_limit + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "current pitch {current_pitch} outside ±{}",
            cfg.pitch_limit
        )));
    }
    let step = cfg.move_speed * s.dt;
    let v = Vector3::new(
        step * s.keys.axis(Key::D, Key::A),
        step * s.keys.axis(Key::Space, Key::Ctrl),
        step * s.keys.axis(Key::W, Key::S),
    );
    let wanted = cfg.pitch_rate * s.mouse_dy;
    let pitch = (current_pitch + wanted).clamp(-cfg.pitch_limit, cfg.pitch_limit) - current_pitch;
    let w = Vector3::new(pitch, cfg.yaw_rate * s.mouse_dx, 0.0);
    Ok(Twist::new(v, w))
}

/// Per-session mapper owning the pitch accumulator.
#[derive(Debug, Clone)]
pub struct ActionMapper {
    cfg: Sensitivity,
    pitch: f64,
}

impl ActionMapper {
    pub fn new(cfg: Sensitivity) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, pitch: 0.0 })
    }

    pub fn sensitivity(&self) -> &Sensitivity {
        &self.cfg
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn reset(&mut self) {
        self.pitch = 0.0;
    }

    pub fn map(&mut self, s: &InputState) -> Result<Twist> {
        let twist = input_to_twist(s, &self.cfg, self.pitch)?;
        self.pitch += twist.w.x;
        Ok(twist)
    }
}

/// Target action vocabularies of other world models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizeScheme {
    /// Binary WASD keys plus integer mouse deltas.
    BinaryKeys,
    /// Discrete motions each with a scaled speed.
    DiscreteSpeed,
    /// Short text phrases.
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizeParams {
    pub linear_threshold: f64,
    pub angular_threshold: f64,
    /// Multiplier turning per-frame velocities into the target's speed units.
    pub speed_scale: f64,
    pub yaw_rate: f64,
    pub pitch_rate: f64,
}

/// Mouse motion, in pixels, that counts as a deliberate turn.
pub const REFERENCE_MOUSE_PX: f64 = 8.0;

impl QuantizeParams {
    /// Thresholds at a quarter of one frame's full-speed motion.
    pub fn from_sensitivity(cfg: &Sensitivity, dt: f64) -> Self {
        Self {
            linear_threshold: 0.25 * cfg.move_speed * dt,
            angular_threshold: 0.25 * cfg.yaw_rate * REFERENCE_MOUSE_PX,
            speed_scale: 1.0 / (cfg.move_speed * dt),
            yaw_rate: cfg.yaw_rate,
            pitch_rate: cfg.pitch_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Motion {
    Forward,
    Backward,
    Left,
    Right,
    TurnLeft,
    TurnRight,
    TiltUp,
    TiltDown,
}

impl Motion {
    fn phrase(self) -> &'static str {
        match self {
            Motion::Forward => "Person moves forward",
            Motion::Backward => "Person moves backward",
            Motion::Left => "Person moves left",
            Motion::Right => "Person moves right",
            Motion::TurnLeft => "Camera turns left",
            Motion::TurnRight => "Camera turns right",
            Motion::TiltUp => "Camera tilts up",
            Motion::TiltDown => "Camera tilts down",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExternalAction {
    BinaryKeys { keys: KeySet, mouse_dx: i64, mouse_dy: i64 },
    DiscreteSpeed(Vec<(Motion, f64)>),
    Text(String),
}

impl ExternalAction {
    pub fn is_inactive(&self) -> bool {
        match self {
            ExternalAction::BinaryKeys { keys, mouse_dx, mouse_dy } => keys.is_empty() && *mouse_dx == 0 && *mouse_dy == 0,
            ExternalAction::DiscreteSpeed(m) => m.is_empty(),
            ExternalAction::Text(t) => t == STILL_PHRASE,
        }
    }
}

pub const STILL_PHRASE: &str = "Person stands still";

fn signed_motion(value: f64, threshold: f64, pos: Motion, neg: Motion) -> Option<(Motion, f64)> {
    if value > threshold {
        Some((pos, value))
    } else if value < -threshold {
        Some((neg, -value))
    } else {
        None
    }
}

fn active_motions(a: &Twist, p: &QuantizeParams) -> Vec<(Motion, f64)> {
    [
        signed_motion(a.v.z, p.linear_threshold, Motion::Forward, Motion::Backward),
        signed_motion(a.v.x, p.linear_threshold, Motion::Right, Motion::Left),
        signed_motion(a.w.y, p.angular_threshold, Motion::TurnRight, Motion::TurnLeft),
        signed_motion(a.w.x, p.angular_threshold, Motion::TiltDown, Motion::TiltUp),
    ]
    .into_iter()
    .flatten()
    .collect()
}

/// Thresholds `(v_x, v_z, ω_x, ω_y)` into one of the external vocabularies.
pub fn quantize_to_external(a: &Twist, scheme: QuantizeScheme, p: &QuantizeParams) -> ExternalAction {
    let motions = active_motions(a, p);
    match scheme {
        QuantizeScheme::BinaryKeys => {
            let mut keys = KeySet::empty();
            let mut mouse_dx = 0;
            let mut mouse_dy = 0;
            for (m, _) in &motions {
                match m {
                    Motion::Forward => keys.insert(Key::W),
                    Motion::Backward => keys.insert(Key::S),
                    Motion::Left => keys.insert(Key::A),
                    Motion::Right => keys.insert(Key::D),
                    Motion::TurnLeft | Motion::TurnRight => mouse_dx = (a.w.y / p.yaw_rate).round() as i64,
                    Motion::TiltUp | Motion::TiltDown => mouse_dy = (a.w.x / p.pitch_rate).round() as i64,
                }
            }
            ExternalAction::BinaryKeys { keys, mouse_dx, mouse_dy }
        }
        QuantizeScheme::DiscreteSpeed => ExternalAction::DiscreteSpeed(
            motions
                .into_iter()
                .map(|(m, mag)| {
                    let scale = match m {
                        Motion::TurnLeft | Motion::TurnRight => 1.0 / p.yaw_rate,
                        Motion::TiltUp | Motion::TiltDown => 1.0 / p.pitch_rate,
                        _ => p.speed_scale,
                    };
                    (m, mag * scale)
                })
                .collect(),
        ),
        QuantizeScheme::Text => {
            if motions.is_empty() {
                ExternalAction::Text(STILL_PHRASE.to_string())
            } else {
                let phrases: Vec<&str> = motions.iter().map(|(m, _)| m.phrase()).collect();
                ExternalAction::Text(phrases.join(", "))
            }
        }
    }
}

/// Component-wise mean, used to describe a chunk of frames by one action.
pub fn average_twists(twists: &[Twist]) -> Twist {
    if twists.is_empty() {
        return Twist::zero();
    }
    let n = twists.len() as f64;
    let (v, w) = twists
        .iter()
        .fold((Vector3::zeros(), Vector3::zeros()), |(v, w), t| (v + t.v, w + t.w));
    Twist::new(v / n, w / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(s: &str) -> KeySet {
        s.parse().unwrap()
    }

    #[test]
    fn idle_input_is_zero_twist() {
        let t = input_to_twist(&InputState::idle(0.05), &Sensitivity::default(), 0.0).unwrap();
        assert_eq!(t, Twist::zero());
    }

    #[test]
    fn forward_key() {
        let s = InputState { keys: keys("W"), mouse_dx: 0.0, mouse_dy: 0.0, dt: 0.05 };
        let t = input_to_twist(&s, &Sensitivity::default(), 0.0).unwrap();
        assert!((t.v - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
        assert_eq!(t.w, Vector3::zeros());
    }

    #[test]
    fn forward_and_turn_is_coupled() {
        let s = InputState { keys: keys("W"), mouse_dx: 40.0, mouse_dy: 0.0, dt: 0.05 };
        let t = input_to_twist(&s, &Sensitivity::default(), 0.0).unwrap();
        assert!((t.v.z - 0.1).abs() < 1e-15);
        assert!((t.w.y - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_dt_rejected() {
        for dt in [0.0, -1.0, f64::NAN] {
            assert!(input_to_twist(&InputState::idle(dt), &Sensitivity::default(), 0.0).is_err());
        }
    }

    #[test]
    fn opposing_keys_cancel() {
        let s = InputState { keys: keys("WASD+Space+Ctrl"), mouse_dx: 0.0, mouse_dy: 0.0, dt: 0.05 };
        assert_eq!(input_to_twist(&s, &Sensitivity::default(), 0.0).unwrap().v, Vector3::zeros());
    }

    #[test]
    fn pitch_is_clamped() {
        let mut m = ActionMapper::new(Sensitivity::default()).unwrap();
        for _ in 0..100 {
            m.map(&InputState { keys: KeySet::empty(), mouse_dx: 0.0, mouse_dy: 100.0, dt: 0.05 }).unwrap();
        }
        assert!((m.pitch() - 1.4).abs() < 1e-12);
        let t = m.map(&InputState { keys: KeySet::empty(), mouse_dx: 0.0, mouse_dy: -10.0, dt: 0.05 }).unwrap();
        assert!((t.w.x + 0.025).abs() < 1e-15);
    }

    #[test]
    fn keyset_text_round_trip() {
        for s in ["", "W", "WD", "AS+Space", "Ctrl", "WASD+Space+Ctrl"] {
            assert_eq!(keys(s).to_string(), s);
        }
        assert!("WX".parse::<KeySet>().is_err());
    }

    #[test]
    fn zero_twist_quantizes_to_inactive() {
        let p = QuantizeParams::from_sensitivity(&Sensitivity::default(), 0.05);
        for scheme in [QuantizeScheme::BinaryKeys, QuantizeScheme::DiscreteSpeed, QuantizeScheme::Text] {
            assert!(quantize_to_external(&Twist::zero(), scheme, &p).is_inactive());
        }
    }

    #[test]
    fn forward_only_gives_w() {
        let p = QuantizeParams::from_sensitivity(&Sensitivity::default(), 0.05);
        let t = Twist::new(Vector3::new(0.01, 0.0, 0.1), Vector3::new(0.001, 0.0, 0.0));
        assert_eq!(
            quantize_to_external(&t, QuantizeScheme::BinaryKeys, &p),
            ExternalAction::BinaryKeys { keys: keys("W"), mouse_dx: 0, mouse_dy: 0 }
        );
        assert_eq!(quantize_to_external(&t, QuantizeScheme::Text, &p), ExternalAction::Text("Person moves forward".into()));
    }
}
