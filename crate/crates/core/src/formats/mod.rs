//! On-disk formats: trajectories, action scripts, pool snapshots, embedder
//! weights and recorded sessions.

mod binary;
mod record;
mod script;
mod trajectory;

pub use binary::{read_embedder, read_pool, write_embedder, write_pool, EMBEDDER_MAGIC, POOL_MAGIC};
pub use record::{RecordHeader, RecordLine, RecordedSession, ENGINE_VERSION};
pub use script::{parse_action_script, write_action_script, ScriptLine};
pub use trajectory::{pose_from_array, pose_to_array, TrajectoryFile, TrajectoryRecord, TRAJECTORY_HEADER};
