//! Engine configuration: a flat `key=value` file.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::action::Sensitivity;
use crate::camera::{DEFAULT_FEATURES, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::rollout::{DriftConfig, NoiseSchedule, WindowConfig};
use crate::se3::DEFAULT_FRAME_INTERVAL;
use crate::world::{DEFAULT_BLOCK, DEFAULT_FOV_DEG};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// `N`, total denoising steps per latent.
    pub steps: usize,
    /// `S`, stages and progressive slots.
    pub stages: usize,
    /// Frames per latent.
    pub r: usize,
    pub window: WindowConfig,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub scene_seed: u64,
    pub sensitivity: Sensitivity,
    pub fov: f64,
    pub frame_interval: f64,
    pub embed_hidden: usize,
    pub embed_features: usize,
    pub drift_base: f64,
    pub drift_growth: f64,
    /// Buffered frames at which a served session stops generating.
    pub high_water: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            steps: 64,
            stages: 8,
            r: 4,
            window: WindowConfig::default(),
            width: 64,
            height: 64,
            seed: 0,
            scene_seed: 0,
            sensitivity: Sensitivity::default(),
            fov: DEFAULT_FOV_DEG,
            frame_interval: DEFAULT_FRAME_INTERVAL,
            embed_hidden: DEFAULT_HIDDEN,
            embed_features: DEFAULT_FEATURES,
            drift_base: DriftConfig::default().base,
            drift_growth: DriftConfig::default().growth,
            high_water: 32,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "N",
    "S",
    "r",
    "sink_size",
    "short_term",
    "long_term_L",
    "retrieval_K",
    "resolution",
    "seed",
    "scene_seed",
    "move_speed",
    "yaw_rate",
    "pitch_rate",
    "pitch_limit",
    "fov",
    "frame_interval",
    "embed_hidden",
    "embed_features",
    "drift_base",
    "drift_growth",
    "high_water",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse_line(line, format!("bad value {value:?} for {key}")))
}

impl SessionConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.stages)
    }

    pub fn drift(&self) -> DriftConfig {
        DriftConfig {
            base: self.drift_base,
            growth: self.drift_growth,
            short_term_ref: self.window.short_term.max(1),
            ..DriftConfig::default()
        }
    }

    /// Latent `(h, w, c)` for this resolution.
    pub fn latent_shape(&self) -> (usize, usize, usize) {
        (self.height / DEFAULT_BLOCK, self.width / DEFAULT_BLOCK, 3 * self.r)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        self.window.validate()?;
        self.sensitivity.validate()?;
        if self.r == 0 {
            return Err(Error::InvalidArgument("r must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 || !self.width.is_multiple_of(DEFAULT_BLOCK) || !self.height.is_multiple_of(DEFAULT_BLOCK) {
            return Err(Error::InvalidArgument(format!(
                "resolution {}x{} must be a positive multiple of {DEFAULT_BLOCK}",
                self.width, self.height
            )));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(Error::InvalidArgument(format!("fov {} outside (0, 180)", self.fov)));
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            return Err(Error::InvalidArgument("frame_interval must be positive".into()));
        }
        if self.embed_hidden == 0 || self.embed_features == 0 {
            return Err(Error::InvalidArgument("embedder widths must be positive".into()));
        }
        if !(self.drift_base >= 0.0 && self.drift_growth >= 0.0) {
            return Err(Error::InvalidArgument("drift parameters must be non-negative".into()));
        }
        if self.high_water == 0 {
            return Err(Error::InvalidArgument("high_water must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses and validates. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse_line(line, format!("expected key=value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "N" => c.steps = parse_value(line, key, value)?,
                "S" => c.stages = parse_value(line, key, value)?,
                "r" => c.r = parse_value(line, key, value)?,
                "sink_size" => c.window.sink_size = parse_value(line, key, value)?,
                "short_term" => c.window.short_term = parse_value(line, key, value)?,
                "long_term_L" => c.window.long_term = parse_value(line, key, value)?,
                "retrieval_K" => c.window.retrieval_k = parse_value(line, key, value)?,
                "resolution" => {
                    let (w, h) = value
                        .split_once('x')
                        .ok_or_else(|| Error::parse_line(line, format!("resolution must be WxH, got {value:?}")))?;
                    c.width = parse_value(line, key, w)?;
                    c.height = parse_value(line, key, h)?;
                }
                "seed" => c.seed = parse_value(line, key, value)?,
                "scene_seed" => c.scene_seed = parse_value(line, key, value)?,
                "move_speed" => c.sensitivity.move_speed = parse_value(line, key, value)?,
                "yaw_rate" => c.sensitivity.yaw_rate = parse_value(line, key, value)?,
                "pitch_rate" => c.sensitivity.pitch_rate = parse_value(line, key, value)?,
                "pitch_limit" => c.sensitivity.pitch_limit = parse_value(line, key, value)?,
                "fov" => c.fov = parse_value(line, key, value)?,
                "frame_interval" => c.frame_interval = parse_value(line, key, value)?,
                "embed_hidden" => c.embed_hidden = parse_value(line, key, value)?,
                "embed_features" => c.embed_features = parse_value(line, key, value)?,
                "drift_base" => c.drift_base = parse_value(line, key, value)?,
                "drift_growth" => c.drift_growth = parse_value(line, key, value)?,
                "high_water" => c.high_water = parse_value(line, key, value)?,
                other => return Err(Error::parse_line(line, format!("unknown key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key, in [`KEYS`] order. Parses back to an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.sensitivity;
        let w = &self.window;
        let mut out = String::new();
        let values: [String; 21] = [
            self.steps.to_string(),
            self.stages.to_string(),
            self.r.to_string(),
            w.sink_size.to_string(),
            w.short_term.to_string(),
            w.long_term.to_string(),
            w.retrieval_k.to_string(),
            format!("{}x{}", self.width, self.height),
            self.seed.to_string(),
            self.scene_seed.to_string(),
            s.move_speed.to_string(),
            s.yaw_rate.to_string(),
            s.pitch_rate.to_string(),
            s.pitch_limit.to_string(),
            self.fov.to_string(),
            self.frame_interval.to_string(),
            self.embed_hidden.to_string(),
            self.embed_features.to_string(),
            self.drift_base.to_string(),
            self.drift_growth.to_string(),
            self.high_water.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}
