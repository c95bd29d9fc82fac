//! Progressive autoregressive inference over a sliding latent window.

mod denoiser;
mod schedule;
mod session;
mod window;

pub use denoiser::*;
pub use schedule::NoiseSchedule;
pub use session::{run_session, ActionRecord, FrameOutput, Session, SessionEvent};
pub use window::{Emission, RolloutWindow, Slot, WindowAudit, WindowConfig};
