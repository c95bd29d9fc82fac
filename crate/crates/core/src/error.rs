use std::fmt;

/// Errors produced anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The rotation angle is too close to pi for the logarithm branch to be unique.
    #[error("near-singular logarithm: rotation angle {angle} is within 1e-6 of pi")]
    NearSingularLog { angle: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("denoiser failed on progressive slot {slot}: {message}")]
    Denoiser { slot: usize, message: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where in an input file a parse failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Offset(o) => write!(f, "byte offset {o}"),
        }
    }
}

impl Error {
    pub(crate) fn parse_line(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location::Line(line),
            message: message.into(),
        }
    }

    pub(crate) fn parse_offset(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location::Offset(offset),
            message: message.into(),
        }
    }

    /// Short machine-readable code, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NearSingularLog { .. } => "near_singular_log",
            Error::Shape(_) => "shape",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidState(_) => "invalid_state",
            Error::Precondition(_) => "precondition",
            Error::Denoiser { .. } => "denoiser",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
