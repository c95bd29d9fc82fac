#![allow(dead_code)]

use nalgebra::Matrix4;
use twistworld::se3::Twist;

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let x = a / f64::powi(2.0, s);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * x / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

pub fn hat(t: &Twist<f64>) -> Matrix4<f64> {
    let (v, w) = (t.v, t.w);
    Matrix4::new(
        0.0, -w.z, w.y, v.x, //
        w.z, 0.0, -w.x, v.y, //
        -w.y, w.x, 0.0, v.z, //
        0.0, 0.0, 0.0, 0.0,
    )
}
