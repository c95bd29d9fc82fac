//! Renders a procedural scene, round-trips it through the latent codec and
//! reports image metrics.

use twistworld::se3::{exp_twist, Pose, Twist};
use twistworld::world::{decode, encode, psnr, render_image, sharpness, Camera, Scene, DEFAULT_BLOCK};

fn main() -> twistworld::Result<()> {
    let scene = Scene::generate(3);
    let camera = Camera::new(64, 64);
    let a = render_image(&scene, &Pose::identity(), &camera);
    let b = render_image(&scene, &exp_twist(&Twist::from_array([0.0, 0.0, 0.0, 0.0, 0.08, 0.0]))?, &camera);

    let latent = encode(std::slice::from_ref(&a), 1, DEFAULT_BLOCK)?;
    let decoded = decode(&latent, DEFAULT_BLOCK)?;
    println!("digest {}", a.digest());
    println!("codec PSNR {:.2} dB", psnr(&a, &decoded[0])?);
    println!("turned view PSNR {:.2} dB", psnr(&a, &b)?);
    println!("sharpness {:.1} vs decoded {:.1}", sharpness(&a), sharpness(&decoded[0]));

    let out = std::env::temp_dir().join("twistworld-view.png");
    std::fs::write(&out, a.to_png())?;
    println!("wrote {}", out.display());
    Ok(())
}
