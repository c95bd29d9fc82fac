pub mod action;
pub mod batch;
pub mod camera;
pub mod config;
pub mod error;
pub mod eval;
pub mod formats;
pub mod memory;
pub mod rollout;
pub mod se3;
pub mod world;

pub use error::{Error, Result};
