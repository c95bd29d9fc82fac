//! Fills a pool along a circle and retrieves the entries nearest a query.

use nalgebra::Vector3;
use twistworld::memory::{realign_for_window, MemoryEntry, MemoryPool};
use twistworld::se3::{exp_so3, Pose};
use twistworld::world::ToyLatent;

fn main() -> twistworld::Result<()> {
    let mut pool = MemoryPool::new(2);
    for i in 0..24u64 {
        let a = i as f64 * std::f64::consts::TAU / 24.0;
        let pose = Pose::new(exp_so3(&Vector3::new(0.0, -a, 0.0)), Vector3::new(5.0 * a.cos(), 0.0, 5.0 * a.sin()));
        pool.insert(MemoryEntry { id: i, pose_set: vec![pose], latent: ToyLatent::zeros(2, 2, 3), frame_range: i * 4..i * 4 + 4 })?;
    }

    let query = *pool.entries()[3].anchor();
    let hits = pool.retrieve(&query, 8, 3)?;
    println!("query at entry 3, eligible {}:", pool.eligible().len());
    for e in &hits {
        println!("  id {:2} frames {:?} at {:?}", e.id, e.frame_range, e.anchor().translation.as_slice());
    }
    for r in realign_for_window(hits, &query) {
        println!("  id {:2} relative to the window: {:?}", r.id, r.poses[0].translation.as_slice());
    }
    Ok(())
}
