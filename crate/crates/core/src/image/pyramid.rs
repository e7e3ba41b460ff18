use super::{reflect, ImageBuffer};
use crate::error::{Error, Result};

/// Smallest width/height a pyramid level may have.
pub const MIN_LEVEL_SIZE: usize = 8;

const BLUR_SIGMA: f64 = 0.8;
const BLUR_RADIUS: isize = 2;

fn gaussian_kernel() -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - BLUR_RADIUS as f64;
        *w = (-d * d / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable 5-tap Gaussian blur (sigma 0.8) with reflected borders.
pub fn blur_gaussian(img: &ImageBuffer) -> ImageBuffer {
    let k = gaussian_kernel();
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let src = img.data();

    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (j, kw) in k.iter().enumerate() {
                    let xx = reflect(x as isize + j as isize - BLUR_RADIUS, w);
                    acc += kw * src[(y * w + xx) * c + ch];
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }

    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (j, kw) in k.iter().enumerate() {
                    let yy = reflect(y as isize + j as isize - BLUR_RADIUS, h);
                    acc += kw * tmp[(yy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc;
            }
        }
    }
    ImageBuffer::new(w, h, c, out).expect("shape preserved")
}

/// Bilinear resampling to `new_width x new_height` with pixel-center alignment.
pub fn resize_bilinear(img: &ImageBuffer, new_width: usize, new_height: usize) -> ImageBuffer {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let sx = w as f64 / new_width as f64;
    let sy = h as f64 / new_height as f64;
    let src = img.data();

    let coord = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - i0 as f64)
    };

    let mut out = Vec::with_capacity(new_width * new_height * c);
    for y in 0..new_height {
        let (y0, y1, fy) = coord(y, sy, h);
        for x in 0..new_width {
            let (x0, x1, fx) = coord(x, sx, w);
            for ch in 0..c {
                let p = |xx: usize, yy: usize| src[(yy * w + xx) * c + ch];
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    ImageBuffer::new(new_width, new_height, c, out).expect("shape computed")
}

/// Anti-aliased downsampling by a factor of two; output dims are `ceil(dim / 2)`.
pub fn downsample_half(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.width() < 6 || img.height() < 6 {
        return Err(Error::invalid_input(format!(
            "downsample_half needs at least 6x6, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let blurred = blur_gaussian(img);
    Ok(resize_bilinear(
        &blurred,
        img.width().div_ceil(2),
        img.height().div_ceil(2),
    ))
}

/// Image pyramid, level 0 finest, each further level at half resolution.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<ImageBuffer>,
}

impl Pyramid {
    pub fn levels(&self) -> &[ImageBuffer] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> &ImageBuffer {
        &self.levels[k]
    }

    pub fn finest(&self) -> &ImageBuffer {
        &self.levels[0]
    }

    pub fn coarsest(&self) -> &ImageBuffer {
        self.levels.last().expect("pyramid has at least one level")
    }
}

/// Number of levels actually usable for an image of the given size when `n`
/// are requested; coarsest level stays at least `MIN_LEVEL_SIZE` on each side.
pub(crate) fn feasible_levels(width: usize, height: usize, n: usize) -> usize {
    let (mut w, mut h) = (width, height);
    let mut levels = 1;
    while levels < n {
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        if nw < MIN_LEVEL_SIZE || nh < MIN_LEVEL_SIZE {
            break;
        }
        w = nw;
        h = nh;
        levels += 1;
    }
    levels
}

/// Build an `n`-level pyramid. If the coarsest level would drop below 8x8 the
/// level count is reduced and a warning is logged.
pub fn build_pyramid(img: &ImageBuffer, n: usize) -> Pyramid {
    let n = n.max(1);
    let usable = feasible_levels(img.width(), img.height(), n);
    if usable < n {
        log::warn!(
            "pyramid for {}x{} image reduced from {n} to {usable} levels",
            img.width(),
            img.height()
        );
    }
    let mut levels = Vec::with_capacity(usable);
    levels.push(img.clone());
    while levels.len() < usable {
        let next = downsample_half(levels.last().unwrap()).expect("size checked above");
        levels.push(next);
    }
    Pyramid { levels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[4]);
        assert_eq!(k[1], k[3]);
    }

    #[test]
    fn downsample_dims() {
        let a = downsample_half(&ImageBuffer::zeros(8, 8, 1)).unwrap();
        assert_eq!(a.dims(), (4, 4));
        let b = downsample_half(&ImageBuffer::zeros(9, 9, 3)).unwrap();
        assert_eq!(b.dims(), (5, 5));
        assert_eq!(b.channels(), 3);
        assert!(downsample_half(&ImageBuffer::zeros(5, 9, 1)).is_err());
    }

    #[test]
    fn constant_survives_downsampling() {
        let c = 0.37;
        let out = downsample_half(&ImageBuffer::filled(13, 10, 1, c)).unwrap();
        assert!(out.data().iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn pyramid_table_dims() {
        let p = build_pyramid(&ImageBuffer::zeros(360, 288, 1), 4);
        let dims: Vec<_> = p.levels().iter().map(|l| l.dims()).collect();
        assert_eq!(dims, vec![(360, 288), (180, 144), (90, 72), (45, 36)]);
    }

    #[test]
    fn pyramid_is_reduced_when_too_deep() {
        let p = build_pyramid(&ImageBuffer::filled(16, 16, 1, 0.5), 10);
        assert_eq!(p.len(), 2);
        assert_eq!(p.coarsest().dims(), (8, 8));
        assert!(p
            .levels()
            .iter()
            .all(|l| l.data().iter().all(|v| (v - 0.5).abs() < 1e-12)));
    }

    #[test]
    fn single_level_pyramid_is_input() {
        let img = ImageBuffer::from_fn(7, 5, |x, y| (x * y) as f64);
        let p = build_pyramid(&img, 1);
        assert_eq!(p.len(), 1);
        assert_eq!(p.finest(), &img);
    }

    #[test]
    fn resize_identity() {
        let img = ImageBuffer::from_fn(6, 4, |x, y| (x + 10 * y) as f64);
        assert_eq!(resize_bilinear(&img, 6, 4), img);
    }
}
