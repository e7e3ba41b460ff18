//! File formats: PFM for floating-point maps, PNG for images and masks.

mod pfm;

use std::path::Path;

use image::{DynamicImage, ImageBuffer as RasterBuffer, Luma, Rgb};

pub use pfm::{decode_pfm, encode_pfm, read_pfm, read_pfm_channels, write_pfm};

use crate::error::{Error, Result};
use crate::image::{DisparityMap, ImageBuffer, PixelMask};

/// Error maps saturate at this many pixels.
pub const ERROR_MAP_CLIP_PX: f64 = 20.0;

/// Decode an 8- or 16-bit PNG into a 3-channel buffer in `[0, 1]`. Grayscale
/// sources are replicated across channels; alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(0, format!("PNG decode failed: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => img
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        _ => return Err(Error::format(0, "unsupported PNG sample type")),
    };
    ImageBuffer::new(w, h, 3, data)
}

/// Read a stereo view. PNG and PFM are accepted; PFM must have 3 channels or
/// 1 channel (replicated).
pub fn read_color(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        return decode_png(&bytes);
    }
    if bytes.starts_with(b"P") {
        let img = decode_pfm(&bytes)?;
        return Ok(match img.channels() {
            3 => img,
            _ => ImageBuffer::from_fn_rgb(img.width(), img.height(), |x, y| {
                let v = img.get(x, y);
                [v, v, v]
            }),
        });
    }
    Err(Error::format(0, format!("{}: not a PNG or PFM file", path.display())))
}

/// Read a mask image; any nonzero sample marks the pixel as set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<PixelMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)?.channel(0)
    } else {
        decode_pfm(&bytes)?.channel(0)
    };
    PixelMask::from_image(&img)
}

/// Write a 3-channel buffer as 16-bit RGB PNG, clamping to `[0, 1]`.
pub fn write_png_rgb(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    img.ensure_channels(3, "PNG output")?;
    let raw: Vec<u16> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf = RasterBuffer::<Rgb<u16>, _>::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer length matches dimensions");
    save(path.as_ref(), DynamicImage::ImageRgb16(buf))
}

/// Write a single-channel buffer as 8-bit grayscale PNG, clamping to `[0, 1]`.
pub fn write_png_gray(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    img.ensure_channels(1, "PNG output")?;
    let raw: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = RasterBuffer::<Luma<u8>, _>::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer length matches dimensions");
    save(path.as_ref(), DynamicImage::ImageLuma8(buf))
}

pub fn write_mask(path: impl AsRef<Path>, mask: &PixelMask) -> Result<()> {
    write_png_gray(path, &mask.to_image())
}

/// `|pred - gt| / ERROR_MAP_CLIP_PX`, saturated at 1. Pixels outside `valid`
/// are 0.
pub fn error_map(pred: &DisparityMap, gt: &DisparityMap, valid: &PixelMask) -> Result<ImageBuffer> {
    pred.ensure_same_dims(gt, "error_map")?;
    if !valid.matches(pred) {
        return Err(Error::invalid_input("error_map: mask dimension mismatch"));
    }
    Ok(ImageBuffer::from_fn(pred.width(), pred.height(), |x, y| {
        if valid.get(x, y) {
            ((pred.get(x, y) - gt.get(x, y)).abs() / ERROR_MAP_CLIP_PX).min(1.0)
        } else {
            0.0
        }
    }))
}

fn save(path: &Path, img: DynamicImage) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(0, format!("PNG encode failed: {other}")),
    })
}
