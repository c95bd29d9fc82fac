//! Per-frame Plucker rows, grouped per latent and pushed through the
//! camera embedder.

use nalgebra::DMatrix;
use twistworld::camera::{embed_and_inject, group_per_latent, poses_to_plucker, CameraEmbedder};
use twistworld::se3::{exp_twist, Pose, Twist};

fn main() -> twistworld::Result<()> {
    let r = 4;
    let step = exp_twist(&Twist::from_array([0.0, 0.0, 0.2, 0.0, 0.05, 0.0]))?;
    let mut poses = vec![Pose::identity()];
    for _ in 1..2 * r {
        let last = *poses.last().unwrap();
        poses.push(twistworld::se3::compose(&last, &step));
    }

    let rows = poses_to_plucker(&poses, &poses[0]);
    println!("{} Plucker rows, first {:?}", rows.len(), rows.rows[1]);
    let code = group_per_latent(&rows, r)?;
    println!("code: {} latents x {} columns", code.latents(), code.row(0).ncols());

    let features = DMatrix::from_element(code.latents(), 3, 1.0);
    let silent = CameraEmbedder::zero_init(r, 8, 3, 1);
    let trained = CameraEmbedder::seeded(r, 8, 3, 1);
    println!("zero-init injection:\n{}", embed_and_inject(&code, &features, &silent)?);
    println!("seeded injection:\n{}", embed_and_inject(&code, &features, &trained)?);
    Ok(())
}
