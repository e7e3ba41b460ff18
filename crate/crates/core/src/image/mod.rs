//! Image containers and the low-level image operations shared by every
//! refinement stage: color conversion, pyramids and horizontal warping.

mod color;
mod pyramid;
mod warp;

pub use color::{saturation_channel, to_grayscale, value_channel};
pub use pyramid::{
    blur_gaussian, build_pyramid, downsample_half, resize_bilinear, Pyramid, MIN_LEVEL_SIZE,
};
pub use warp::{sample_row_linear, warp_horizontal};

use crate::error::{Error, Result};

/// Row-major grid of `f64` samples with 1 or 3 interleaved channels.
///
/// Color and gray images hold intensities in `[0, 1]`; disparity, depth and
/// confidence fields reuse the same container with a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

/// Per-pixel signed horizontal displacement in pixels. Left pixel `x` matches
/// right-image column `x + u(x)`.
pub type DisparityMap = ImageBuffer;

/// Per-pixel reliability in `[0, 1]`.
pub type ConfidenceMap = ImageBuffer;

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid_input(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid_input(format!(
                "buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    /// Single-channel image built from a per-pixel function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    /// Three-channel image built from a per-pixel function.
    pub fn from_fn_rgb(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Sample of a single-channel image.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn get_channel(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel_rgb(&self, x: usize, y: usize) -> [f64; 3] {
        debug_assert_eq!(self.channels, 3);
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Row `y` of a single-channel image.
    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    /// Copy out channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> ImageBuffer {
        assert!(c < self.channels);
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[c])
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Elementwise map, preserving shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_dims(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_channels(&self, channels: usize, what: &str) -> Result<()> {
        if self.channels != channels {
            return Err(Error::invalid_input(format!(
                "{what} must have {channels} channel(s), got {}",
                self.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn ensure_same_dims(&self, other: &ImageBuffer, what: &str) -> Result<()> {
        if !self.same_dims(other) {
            return Err(Error::invalid_input(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub(crate) fn ensure_min_size(&self, min: usize, what: &str) -> Result<()> {
        if self.width < min || self.height < min {
            return Err(Error::invalid_input(format!(
                "{what}: image {}x{} is smaller than {min}x{min}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl PixelMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid_input(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Nonzero samples of a single-channel image become set pixels.
    pub fn from_image(img: &ImageBuffer) -> Result<Self> {
        img.ensure_channels(1, "mask source")?;
        Ok(Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| v != 0.0).collect(),
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn not(&self) -> PixelMask {
        PixelMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    pub fn and(&self, other: &PixelMask) -> PixelMask {
        assert_eq!(self.dims(), other.dims());
        PixelMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    /// Mask as a 0/1 single-channel image.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub(crate) fn matches(&self, img: &ImageBuffer) -> bool {
        self.width == img.width() && self.height == img.height()
    }
}

/// Reflect an index into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 5), 3);
        assert_eq!(reflect(-7, 1), 0);
        assert_eq!(reflect(-1, 2), 1);
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(ImageBuffer::new(3, 3, 1, vec![0.0; 8]).is_err());
        assert!(ImageBuffer::new(3, 3, 2, vec![0.0; 18]).is_err());
        assert!(ImageBuffer::new(3, 3, 3, vec![0.0; 27]).is_ok());
    }

    #[test]
    fn channel_extraction() {
        let img = ImageBuffer::from_fn_rgb(2, 2, |x, y| [x as f64, y as f64, 7.0]);
        let g = img.channel(1);
        assert_eq!(g.data(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(img.channel(2).data(), &[7.0; 4]);
    }

    #[test]
    fn mask_ops() {
        let a = PixelMask::from_fn(3, 1, |x, _| x > 0);
        let b = PixelMask::from_fn(3, 1, |x, _| x < 2);
        assert_eq!(a.and(&b).data(), &[false, true, false]);
        assert_eq!(a.not().count(), 1);
        assert_eq!(a.to_image().data(), &[0.0, 1.0, 1.0]);
    }
}
