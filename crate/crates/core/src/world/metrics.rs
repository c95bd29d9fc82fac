use super::Image;
use crate::error::Result;

/// Value returned for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// `10·log10(255² / MSE)` over all channels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let sse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.data.len().max(1) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Variance of the 4-neighbour Laplacian of the luma image, interior pixels.
pub fn sharpness(f: &Image) -> f64 {
    if f.width < 3 || f.height < 3 {
        return 0.0;
    }
    let luma: Vec<f64> = f
        .data
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    let at = |x: usize, y: usize| luma[y * f.width + x];
    let mut values = Vec::with_capacity((f.width - 2) * (f.height - 2));
    for y in 1..f.height - 1 {
        for x in 1..f.width - 1 {
            values.push(at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y));
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
