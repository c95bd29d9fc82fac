//! Integrates a constant screw motion and compares it to naive Euler steps.

use twistworld::se3::{compose, exp_twist, linear_step, log_pose, Pose, Twist};

fn main() -> twistworld::Result<()> {
    let twist = Twist::from_array([0.0, 0.0, 0.5, 0.0, 0.3, 0.0]);
    let step = exp_twist(&twist)?;
    println!("exp(twist) =\n{}", step.to_matrix());

    let back = log_pose(&step)?;
    println!("log(exp(twist)) = {:?}", back.to_array());

    let (mut lie, mut linear) = (Pose::identity(), Pose::identity());
    for i in 1..=20 {
        lie = compose(&lie, &step);
        linear = linear_step(&linear, &twist);
        if i % 5 == 0 {
            let gap = (lie.translation - linear.translation).norm();
            println!("step {i:2}: lie {:?}  linear {:?}  gap {gap:.3}", lie.translation.as_slice(), linear.translation.as_slice());
        }
    }
    Ok(())
}
