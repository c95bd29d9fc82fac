//! Records a session, checks the replay reproduces it, and segments the
//! camera path into retrieval windows.

use twistworld::batch::{replay, run_rollout, segment_record, segments_text, square_loop};
use twistworld::config::SessionConfig;
use twistworld::formats::RecordedSession;
use twistworld::se3::Pose;

fn main() -> twistworld::Result<()> {
    let run = run_rollout(&SessionConfig::default(), Pose::identity(), &square_loop(10, 4, 126.0, 0.05))?;
    let text = run.record().to_jsonl();
    println!("record: {} lines", text.lines().count());

    let record = RecordedSession::parse(&text)?;
    let report = replay(&record)?;
    println!("replay checked {} frames, {} mismatches", report.checked, report.mismatches.len());

    print!("{}", segments_text(&segment_record(&record, 16, 3, 4)?));
    Ok(())
}
