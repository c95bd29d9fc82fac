//! Command line and streaming service around the `twistworld` engine.

pub mod cli;
pub mod protocol;
pub mod service;
