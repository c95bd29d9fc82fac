//! Drives an interactive session with a short script and writes the frames.

use twistworld::batch::{run_rollout, square_loop, write_rollout_dir};
use twistworld::config::SessionConfig;
use twistworld::se3::Pose;

fn main() -> twistworld::Result<()> {
    let cfg = SessionConfig::default();
    let run = run_rollout(&cfg, Pose::identity(), &square_loop(6, 3, 126.0, 0.05))?;
    for f in run.frames.iter().step_by(8) {
        println!("frame {:3} at {:?} memory {:?}", f.index, f.pose.translation.as_slice(), f.retrieved);
    }
    let audit = &run.audit;
    println!("{} latents emitted, {} ordering violations", audit.emissions, audit.monotonicity_violations);
    println!("{}", run.timing().to_text());

    let out = std::env::temp_dir().join("twistworld-rollout");
    write_rollout_dir(&run, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
