use super::Image;
use crate::error::{Error, Result};

/// Spatial downsample factor of the codec.
pub const DEFAULT_BLOCK: usize = 8;

/// `h × w × c` latent, row-major with channel fastest. Channel `3k + j` holds
/// color `j` of frame `k`, as block means in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLatent {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

impl ToyLatent {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn frames(&self) -> usize {
        self.c / 3
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &ToyLatent) -> bool {
        self.h == other.h && self.w == other.w && self.c == other.c
    }

    pub fn at(&self, y: usize, x: usize, ch: usize) -> f32 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    /// Mean absolute difference.
    pub fn mean_abs_diff(&self, other: &ToyLatent) -> f64 {
        let n = self.data.len().max(1) as f64;
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum::<f64>()
            / n
    }

    pub fn max_abs_diff(&self, other: &ToyLatent) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .fold(0.0, f64::max)
    }
}

/// Block-averages each frame and stacks frames along channels.
pub fn encode(frames: &[Image], r: usize, block: usize) -> Result<ToyLatent> {
    if frames.len() != r {
        return Err(Error::Shape(format!("codec expects {r} frames, got {}", frames.len())));
    }
    let first = &frames[0];
    for f in frames {
        first.same_shape(f)?;
    }
    if block == 0 || !first.width.is_multiple_of(block) || !first.height.is_multiple_of(block) {
        return Err(Error::Shape(format!(
            "{}×{} is not divisible into {block}-pixel blocks",
            first.width, first.height
        )));
    }
    let (h, w, c) = (first.height / block, first.width / block, 3 * r);
    let mut out = ToyLatent::zeros(h, w, c);
    let norm = 1.0 / (255.0 * (block * block) as f64);
    for (k, img) in frames.iter().enumerate() {
        for by in 0..h {
            for bx in 0..w {
                let mut sum = [0u32; 3];
                for y in by * block..(by + 1) * block {
                    for x in bx * block..(bx + 1) * block {
                        let p = img.pixel(x, y);
                        for j in 0..3 {
                            sum[j] += p[j] as u32;
                        }
                    }
                }
                for j in 0..3 {
                    out.data[(by * w + bx) * c + 3 * k + j] = (sum[j] as f64 * norm) as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour upsample of every frame in the latent.
pub fn decode(l: &ToyLatent, block: usize) -> Result<Vec<Image>> {
    if !l.c.is_multiple_of(3) || l.data.len() != l.h * l.w * l.c {
        return Err(Error::Shape(format!("latent {}×{}×{} is malformed", l.h, l.w, l.c)));
    }
    let (width, height) = (l.w * block, l.h * block);
    let frames = (0..l.frames())
        .map(|k| {
            let mut img = Image::filled(width, height, [0, 0, 0]);
            for y in 0..height {
                for x in 0..width {
                    let base = ((y / block) * l.w + x / block) * l.c + 3 * k;
                    let rgb = [0, 1, 2].map(|j| (l.data[base + j].clamp(0.0, 1.0) as f64 * 255.0).round() as u8);
                    img.set_pixel(x, y, rgb);
                }
            }
            img
        })
        .collect();
    Ok(frames)
}
