use nalgebra::Vector3;

use super::{Frame, Image, Scene};
use crate::se3::Pose;

pub const DEFAULT_FOV_DEG: f64 = 75.0;

const FALLOFF: f64 = 0.12;
const VOID: [u8; 3] = [16, 16, 24];

/// Pinhole intrinsics. Pixel columns grow along camera +x, rows along −y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Vertical field of view, degrees.
    pub fov_deg: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            fov_deg: DEFAULT_FOV_DEG,
        }
    }

    fn focal(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Camera-frame ray through the pixel center, scaled so its z is 1.
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let f = self.focal();
        Vector3::new(
            (u as f64 + 0.5 - self.width as f64 / 2.0) / f,
            -(v as f64 + 0.5 - self.height as f64 / 2.0) / f,
            1.0,
        )
    }
}

/// Result of one traversal: block color and hit depth along the optical axis.
struct Hit {
    color: [u8; 3],
    depth: f64,
}

/// Amanatides–Woo traversal. `dir` need not be normalized; the returned depth
/// is in units of `dir`.
fn cast(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut cell = scene.cell_of(origin);
    if scene.block(cell).is_solid() {
        return Some(Hit {
            color: scene.color(cell),
            depth: 0.0,
        });
    }
    let local = origin - scene.origin();
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let d = dir[a];
        if d > 0.0 {
            step[a] = 1;
            t_max[a] = ((cell[a] + 1) as f64 - local[a]) / d;
            t_delta[a] = 1.0 / d;
        } else if d < 0.0 {
            step[a] = -1;
            t_max[a] = (cell[a] as f64 - local[a]) / d;
            t_delta[a] = -1.0 / d;
        }
    }
    let dims = scene.dims();
    let max_steps = dims[0] + dims[1] + dims[2] + 3;
    for _ in 0..max_steps {
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        let t = t_max[axis];
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if !scene.in_bounds(cell) {
            return None;
        }
        if scene.block(cell).is_solid() {
            return Some(Hit {
                color: scene.color(cell),
                depth: t,
            });
        }
    }
    None
}

fn shade(hit: Option<Hit>) -> [u8; 3] {
    match hit {
        None => VOID,
        Some(h) => {
            let k = 1.0 / (1.0 + FALLOFF * h.depth);
            h.color.map(|c| (c as f64 * k).round() as u8)
        }
    }
}

/// Moves a camera center that left the grid back inside it.
fn clamp_center(scene: &Scene, p: &Vector3<f64>) -> Vector3<f64> {
    let lo = scene.origin();
    let dims = scene.dims();
    let mut q = *p;
    for a in 0..3 {
        let min = lo[a] + 1e-3;
        let max = lo[a] + dims[a] as f64 - 1e-3;
        q[a] = q[a].clamp(min, max);
    }
    if q != *p {
        log::warn!("camera at {:?} is outside the scene, clamped to {:?}", p.as_slice(), q.as_slice());
    }
    q
}

pub fn render_image(scene: &Scene, pose: &Pose, camera: &Camera) -> Image {
    let center = clamp_center(scene, &pose.translation);
    let mut img = Image::filled(camera.width, camera.height, VOID);
    for v in 0..camera.height {
        for u in 0..camera.width {
            let dir = pose.rotation * camera.ray(u, v);
            img.set_pixel(u, v, shade(cast(scene, &center, &dir)));
        }
    }
    img
}

pub fn render(scene: &Scene, pose: &Pose, camera: &Camera, index: u64) -> Frame {
    Frame {
        image: render_image(scene, pose, camera),
        pose: *pose,
        index,
    }
}
