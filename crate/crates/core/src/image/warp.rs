use super::{DisparityMap, ImageBuffer, PixelMask};
use crate::error::Result;
use rayon::prelude::*;

/// Linear interpolation of `row` (with `channels` interleaved) at horizontal
/// position `xs` into `out`. Returns `false` when `xs` falls outside `[0, len - 1]`.
#[inline]
pub fn sample_row_linear(row: &[f64], channels: usize, xs: f64, out: &mut [f64]) -> bool {
    let len = row.len() / channels;
    if !(xs >= 0.0 && xs <= (len - 1) as f64) {
        return false;
    }
    let x0 = xs.floor() as usize;
    let f = xs - x0 as f64;
    if f == 0.0 || x0 + 1 >= len {
        out[..channels].copy_from_slice(&row[x0 * channels..(x0 + 1) * channels]);
    } else {
        for c in 0..channels {
            let a = row[x0 * channels + c];
            let b = row[(x0 + 1) * channels + c];
            out[c] = a + f * (b - a);
        }
    }
    true
}

/// Resample `img` at `(x + u(x, y), y)`.
///
/// Samples landing outside `[0, width - 1]` are written as 0 and cleared in
/// the returned validity mask.
pub fn warp_horizontal(img: &ImageBuffer, disp: &DisparityMap) -> Result<(ImageBuffer, PixelMask)> {
    img.ensure_same_dims(disp, "warp_horizontal")?;
    disp.ensure_channels(1, "disparity")?;
    let (w, h, c) = (img.width(), img.height(), img.channels());

    let mut out = vec![0.0; w * h * c];
    let mut valid = vec![false; w * h];
    out.par_chunks_mut(w * c)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (out_row, valid_row))| {
            let src = img.row(y);
            let u = disp.row(y);
            for x in 0..w {
                let xs = x as f64 + u[x];
                valid_row[x] = sample_row_linear(src, c, xs, &mut out_row[x * c..(x + 1) * c]);
            }
        });

    Ok((
        ImageBuffer::new(w, h, c, out)?,
        PixelMask::from_vec(w, h, valid)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disparity_is_identity() {
        let img = ImageBuffer::from_fn(7, 4, |x, y| (x as f64).sin() + y as f64);
        let (out, mask) = warp_horizontal(&img, &ImageBuffer::zeros(7, 4, 1)).unwrap();
        assert_eq!(out, img);
        assert_eq!(mask.count(), 28);
    }

    #[test]
    fn unit_shift_masks_last_column() {
        let img = ImageBuffer::filled(5, 3, 1, 1.0);
        let (out, mask) = warp_horizontal(&img, &ImageBuffer::filled(5, 3, 1, 1.0)).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(mask.get(x, y), x < 4);
                assert_eq!(out.get(x, y), if x < 4 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn half_pixel_on_ramp_is_exact() {
        let img = ImageBuffer::from_fn(10, 2, |x, _| x as f64);
        let (out, mask) = warp_horizontal(&img, &ImageBuffer::filled(10, 2, 1, 0.5)).unwrap();
        for x in 0..9 {
            assert!(mask.get(x, 1));
            assert!((out.get(x, 1) - (x as f64 + 0.5)).abs() < 1e-12);
        }
        assert!(!mask.get(9, 0));
    }

    #[test]
    fn color_warp() {
        let img = ImageBuffer::from_fn_rgb(4, 1, |x, _| [x as f64, 2.0 * x as f64, 0.0]);
        let (out, _) = warp_horizontal(&img, &ImageBuffer::filled(4, 1, 1, 0.25)).unwrap();
        assert!((out.get_channel(1, 0, 1) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let img = ImageBuffer::zeros(4, 4, 1);
        assert!(warp_horizontal(&img, &ImageBuffer::zeros(4, 3, 1)).is_err());
    }
}
