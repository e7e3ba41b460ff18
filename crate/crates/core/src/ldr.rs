//! Local disparity refinement.
//!
//! A fused confidence map is built from four cues: agreement with the local
//! mean disparity, photometric consistency between the views, a specular
//! highlight mask and a border-occlusion mask. Pixels whose fused confidence
//! falls below `th_f` are treated as outliers and replaced by the median of
//! the first inliers met when marching along the eight compass directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    reflect, saturation_channel, to_grayscale, value_channel, warp_horizontal, ConfidenceMap,
    DisparityMap, ImageBuffer, PixelMask,
};

/// Color channel used to detect specular highlights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecularChannel {
    /// HSV saturation; a pixel is kept when `S > th_s`.
    Saturation,
    /// HSV value; a pixel is kept when `V < th_s`.
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdrParams {
    pub alpha_s: f64,
    pub alpha_p: f64,
    pub th_f: f64,
    pub th_s: f64,
    pub window: usize,
    pub eps_div: f64,
    pub specular_channel: SpecularChannel,
}

impl Default for LdrParams {
    fn default() -> Self {
        Self {
            alpha_s: 20.0,
            alpha_p: 2.0,
            th_f: 0.5,
            th_s: 0.1,
            window: 9,
            eps_div: 1e-6,
            specular_channel: SpecularChannel::Saturation,
        }
    }
}

impl LdrParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::invalid_config(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        for (name, v) in [("th_f", self.th_f), ("th_s", self.th_s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid_config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("alpha_s", self.alpha_s),
            ("alpha_p", self.alpha_p),
            ("eps_div", self.eps_div),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean over a `window x window` box with reflected borders.
pub(crate) fn box_mean(img: &ImageBuffer, window: usize) -> ImageBuffer {
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    let norm = 1.0 / window as f64;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            let mut acc = 0.0;
            for dx in -r..=r {
                acc += row[reflect(x as isize + dx, w)];
            }
            tmp[y * w + x] = acc * norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                acc += tmp[reflect(y as isize + dy, h) * w + x];
            }
            out[y * w + x] = acc * norm;
        }
    }
    ImageBuffer::new(w, h, 1, out).expect("shape preserved")
}

/// Confidence from agreement with the local mean disparity.
pub fn smoothness_confidence(disp: &DisparityMap, p: &LdrParams) -> Result<ConfidenceMap> {
    disp.ensure_channels(1, "disparity")?;
    let mean = box_mean(disp, p.window);
    let data = disp
        .data()
        .iter()
        .zip(mean.data())
        .map(|(&u, &m)| (1.0 - p.alpha_s * (u - m).abs() / m.abs().max(p.eps_div)).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(disp.width(), disp.height(), 1, data)
}

/// Confidence from photometric consistency of `left(x)` and `right(x + u(x))`.
/// Pixels whose match falls outside the right image get zero.
pub fn photo_confidence(
    left: &ImageBuffer,
    right: &ImageBuffer,
    disp: &DisparityMap,
    p: &LdrParams,
) -> Result<ConfidenceMap> {
    left.ensure_channels(1, "left intensity")?;
    right.ensure_channels(1, "right intensity")?;
    left.ensure_same_dims(right, "photo_confidence")?;
    left.ensure_same_dims(disp, "photo_confidence")?;
    let (warped, valid) = warp_horizontal(right, disp)?;
    let data = left
        .data()
        .iter()
        .zip(warped.data())
        .zip(valid.data())
        .map(|((&is, &it), &ok)| {
            if !ok {
                return 0.0;
            }
            (1.0 - p.alpha_p * (is - it).abs() / is.max(p.eps_div)).clamp(0.0, 1.0)
        })
        .collect();
    ImageBuffer::new(left.width(), left.height(), 1, data)
}

/// Specular highlight mask; 0 on highlight pixels, 1 elsewhere.
pub fn specular_mask(color_left: &ImageBuffer, p: &LdrParams) -> Result<PixelMask> {
    color_left.ensure_channels(3, "specular_mask input")?;
    let (channel, keep): (_, fn(f64, f64) -> bool) = match p.specular_channel {
        SpecularChannel::Saturation => (saturation_channel(color_left)?, |s, th| s > th),
        SpecularChannel::Value => (value_channel(color_left)?, |v, th| v < th),
    };
    let data = channel.data().iter().map(|&v| keep(v, p.th_s)).collect();
    PixelMask::from_vec(color_left.width(), color_left.height(), data)
}

/// 1 where `x + u(x)` lands inside the right image.
pub fn border_mask(disp: &DisparityMap) -> Result<PixelMask> {
    disp.ensure_channels(1, "disparity")?;
    let last = (disp.width() - 1) as f64;
    Ok(PixelMask::from_fn(disp.width(), disp.height(), |x, y| {
        let xs = x as f64 + disp.get(x, y);
        (0.0..=last).contains(&xs)
    }))
}

/// Pixelwise product of both confidence maps and both masks.
pub fn final_confidence(
    cs: &ConfidenceMap,
    cp: &ConfidenceMap,
    ms: &PixelMask,
    mb: &PixelMask,
) -> Result<ConfidenceMap> {
    cs.ensure_same_dims(cp, "final_confidence")?;
    if !ms.matches(cs) || !mb.matches(cs) {
        return Err(Error::invalid_input("final_confidence: mask dimension mismatch"));
    }
    let data = cs
        .data()
        .iter()
        .zip(cp.data())
        .zip(ms.data().iter().zip(mb.data()))
        .map(|((&s, &p), (&m_s, &m_b))| {
            if m_s && m_b {
                (s * p).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    ImageBuffer::new(cs.width(), cs.height(), 1, data)
}

const DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Median with the even case resolved to the mean of the two middle values.
pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Replace every pixel with confidence below `th_f` by the median of the
/// nearest inlier found along each of the eight compass directions.
pub fn interpolate_outliers(
    disp: &DisparityMap,
    conf: &ConfidenceMap,
    p: &LdrParams,
) -> Result<DisparityMap> {
    disp.ensure_channels(1, "disparity")?;
    disp.ensure_same_dims(conf, "interpolate_outliers")?;
    let (w, h) = disp.dims();
    let is_inlier = |x: usize, y: usize| conf.get(x, y) >= p.th_f;

    let mut out = disp.data().to_vec();
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut found = [0.0f64; 8];
        for (x, value) in row.iter_mut().enumerate() {
            if is_inlier(x, y) {
                continue;
            }
            let mut n = 0;
            for &(dx, dy) in &DIRECTIONS {
                let (mut cx, mut cy) = (x as isize + dx, y as isize + dy);
                while cx >= 0 && cy >= 0 && (cx as usize) < w && (cy as usize) < h {
                    if is_inlier(cx as usize, cy as usize) {
                        found[n] = disp.get(cx as usize, cy as usize);
                        n += 1;
                        break;
                    }
                    cx += dx;
                    cy += dy;
                }
            }
            if let Some(m) = median(&mut found[..n]) {
                *value = m;
            }
        }
    });
    ImageBuffer::new(w, h, 1, out)
}

/// Result of [`refine_local`].
#[derive(Debug, Clone)]
pub struct LocalRefinement {
    pub disparity: DisparityMap,
    pub confidence: ConfidenceMap,
    /// Pixels whose confidence fell below `th_f`.
    pub outliers: usize,
}

/// Full local refinement: confidence estimation followed by outlier
/// interpolation.
pub fn refine_local(
    color_left: &ImageBuffer,
    color_right: &ImageBuffer,
    disp: &DisparityMap,
    p: &LdrParams,
) -> Result<LocalRefinement> {
    p.validate()?;
    color_left.ensure_channels(3, "left image")?;
    color_right.ensure_channels(3, "right image")?;
    color_left.ensure_same_dims(color_right, "refine_local")?;
    color_left.ensure_same_dims(disp, "refine_local")?;
    if !disp.is_finite() {
        return Err(Error::invalid_input("initial disparity contains NaN or Inf"));
    }

    let left = to_grayscale(color_left)?;
    let right = to_grayscale(color_right)?;
    let cs = smoothness_confidence(disp, p)?;
    let cp = photo_confidence(&left, &right, disp, p)?;
    let ms = specular_mask(color_left, p)?;
    let mb = border_mask(disp)?;
    let confidence = final_confidence(&cs, &cp, &ms, &mb)?;
    let outliers = confidence.data().iter().filter(|&&c| c < p.th_f).count();
    let disparity = interpolate_outliers(disp, &confidence, p)?;
    Ok(LocalRefinement {
        disparity,
        confidence,
        outliers,
    })
}
