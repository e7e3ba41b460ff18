use super::ImageBuffer;
use crate::error::Result;

const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// ITU-R 601 luma of an RGB image.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    img.ensure_channels(3, "to_grayscale")?;
    Ok(per_pixel(img, |[r, g, b]| {
        let l = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b;
        l.clamp(0.0, 1.0)
    }))
}

/// HSV saturation `(max - min) / max`, zero where `max == 0`.
pub fn saturation_channel(img: &ImageBuffer) -> Result<ImageBuffer> {
    img.ensure_channels(3, "saturation_channel")?;
    Ok(per_pixel(img, |[r, g, b]| {
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        if max <= 0.0 {
            0.0
        } else {
            ((max - min) / max).clamp(0.0, 1.0)
        }
    }))
}

/// HSV value `max(r, g, b)`.
pub fn value_channel(img: &ImageBuffer) -> Result<ImageBuffer> {
    img.ensure_channels(3, "value_channel")?;
    Ok(per_pixel(img, |[r, g, b]| r.max(g).max(b).clamp(0.0, 1.0)))
}

fn per_pixel(img: &ImageBuffer, f: impl Fn([f64; 3]) -> f64) -> ImageBuffer {
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| f([px[0], px[1], px[2]]))
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data).expect("shape preserved")
}
