//! Synthetic stereo scenes with exact ground truth, disparity corruption
//! models and an exhaustive-search matching oracle.
//!
//! Disparity models are specified in the usual dataset convention: a positive
//! value `d` means the right-image match sits `d` pixels to the left. The
//! generated ground truth uses the crate's signed convention, `u = -d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gdr::{descriptor_field, DescriptorField};
use crate::image::{DisparityMap, ImageBuffer, PixelMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Texture {
    /// Three octaves of seeded value noise.
    RandomSmooth,
    Checker { cell: f64 },
    /// Horizontal intensity ramp.
    Ramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisparityModel {
    Constant {
        value: f64,
    },
    /// `base + amplitude * sin(2 pi x / period) * cos(2 pi y / period)`.
    Sinusoid {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// `base + slope * x`.
    TiltedPlane {
        #[serde(default)]
        base: f64,
        slope: f64,
    },
}

impl DisparityModel {
    /// Dataset-convention disparity at left-image position `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            DisparityModel::Constant { value } => value,
            DisparityModel::Sinusoid {
                base,
                amplitude,
                period,
            } => {
                let k = std::f64::consts::TAU / period;
                base + amplitude * (k * x).sin() * (k * y).cos()
            }
            DisparityModel::TiltedPlane { base, slope } => base + slope * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecularBlobs {
    pub count: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub texture: Texture,
    pub disparity: DisparityModel,
    #[serde(default = "one")]
    pub illum_a: f64,
    #[serde(default)]
    pub illum_b: f64,
    #[serde(default)]
    pub specular: SpecularBlobs,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SceneSpec {
    /// Textured scene with a constant integer shift and no illumination change.
    pub fn shifted(width: usize, height: usize, shift: f64, seed: u64) -> Self {
        Self {
            width,
            height,
            texture: Texture::RandomSmooth,
            disparity: DisparityModel::Constant { value: shift },
            illum_a: 1.0,
            illum_b: 0.0,
            specular: SpecularBlobs::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::invalid_input("scene must be at least 8x8"));
        }
        if !(self.illum_a > 0.0) || !self.illum_b.is_finite() {
            return Err(Error::invalid_input("illum_a must be positive, illum_b finite"));
        }
        match self.texture {
            Texture::Checker { cell } if !(cell > 0.0) => {
                return Err(Error::invalid_input("checker cell must be positive"))
            }
            _ => {}
        }
        if let DisparityModel::Sinusoid { period, .. } = self.disparity {
            if !(period > 0.0) {
                return Err(Error::invalid_input("sinusoid period must be positive"));
            }
        }
        Ok(())
    }
}

/// Generated stereo pair with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub left: ImageBuffer,
    pub right: ImageBuffer,
    /// Signed disparity: left pixel `x` matches right column `x + u`.
    pub gt_disparity: DisparityMap,
    /// Set where the match falls outside the right image.
    pub occlusion: PixelMask,
    /// Set on specular highlight pixels of the left view.
    pub specular: PixelMask,
}

impl Scene {
    /// Pixels that have a correspondence in the right image.
    pub fn visible(&self) -> PixelMask {
        self.occlusion.not()
    }

    pub fn left_gray(&self) -> ImageBuffer {
        crate::image::to_grayscale(&self.left).expect("scene images are RGB")
    }

    pub fn right_gray(&self) -> ImageBuffer {
        crate::image::to_grayscale(&self.right).expect("scene images are RGB")
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` attached to an integer lattice point.
#[inline]
fn lattice_value(seed: u64, octave: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix(octave ^ splitmix(ix as u64 ^ splitmix(iy as u64))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise(seed: u64, octave: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (fade(x - fx), fade(y - fy));
    let v = |dx: i64, dy: i64| lattice_value(seed, octave, ix + dx, iy + dy);
    let top = v(0, 0) + tx * (v(1, 0) - v(0, 0));
    let bottom = v(0, 1) + tx * (v(1, 1) - v(0, 1));
    top + ty * (bottom - top)
}

const OCTAVES: [(f64, f64); 3] = [(8.0, 0.4), (4.0, 0.35), (2.0, 0.25)];
const INTENSITY_LOW: f64 = 0.12;
const INTENSITY_HIGH: f64 = 0.72;
// tissue-like tint; channels proportional so luma stays affine in intensity
const TINT: [f64; 3] = [1.0, 0.65, 0.55];

struct Renderer<'a> {
    spec: &'a SceneSpec,
    blobs: Vec<(f64, f64, f64)>,
}

impl<'a> Renderer<'a> {
    fn new(spec: &'a SceneSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5bec_u64);
        let blobs = (0..spec.specular.count)
            .map(|_| {
                let cx = rng.gen_range(0.0..spec.width as f64);
                let cy = rng.gen_range(0.0..spec.height as f64);
                (cx, cy, spec.specular.radius)
            })
            .collect();
        Self { spec, blobs }
    }

    fn is_specular(&self, x: f64, y: f64) -> bool {
        self.blobs
            .iter()
            .any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
    }

    /// Scalar intensity of the left view's surface at continuous `(x, y)`.
    fn intensity(&self, x: f64, y: f64) -> f64 {
        let n = match self.spec.texture {
            Texture::RandomSmooth => OCTAVES
                .iter()
                .enumerate()
                .map(|(o, &(cell, weight))| {
                    weight * value_noise(self.spec.seed, o as u64, x / cell, y / cell)
                })
                .sum::<f64>(),
            Texture::Checker { cell } => {
                let parity = ((x / cell).floor() as i64 + (y / cell).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    0.2
                } else {
                    0.8
                }
            }
            Texture::Ramp => x / self.spec.width as f64,
        };
        INTENSITY_LOW + (INTENSITY_HIGH - INTENSITY_LOW) * n.clamp(0.0, 1.0)
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        if self.is_specular(x, y) {
            return [1.0; 3];
        }
        let v = self.intensity(x, y);
        TINT.map(|t| t * v)
    }
}

/// Render a stereo pair from `spec`. The right view at column `x'` shows the
/// surface point `x''` solving `x'' = x' + d(x'')`, with affine illumination
/// `a * c + b` applied per channel and clamped to `[0, 1]`.
pub fn gen_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let bound = w as f64 / 4.0;
    let mut max_abs = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            max_abs = max_abs.max(spec.disparity.eval(x as f64, y as f64).abs());
        }
    }
    if max_abs > bound {
        return Err(Error::invalid_input(format!(
            "disparity magnitude {max_abs:.3} exceeds width / 4 = {bound}"
        )));
    }

    let r = Renderer::new(spec);
    let left = ImageBuffer::from_fn_rgb(w, h, |x, y| r.color(x as f64, y as f64));

    let mut right_data = vec![0.0; w * h * 3];
    right_data
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            let yf = y as f64;
            for x in 0..w {
                let xr = x as f64;
                let mut xs = xr + spec.disparity.eval(xr, yf);
                for _ in 0..30 {
                    xs = xr + spec.disparity.eval(xs, yf);
                }
                let c = r.color(xs, yf);
                for k in 0..3 {
                    row[x * 3 + k] = (spec.illum_a * c[k] + spec.illum_b).clamp(0.0, 1.0);
                }
            }
        });
    let right = ImageBuffer::new(w, h, 3, right_data)?;

    let gt_disparity = ImageBuffer::from_fn(w, h, |x, y| -spec.disparity.eval(x as f64, y as f64));
    let last = (w - 1) as f64;
    let occlusion = PixelMask::from_fn(w, h, |x, y| {
        let xs = x as f64 + gt_disparity.get(x, y);
        !(0.0..=last).contains(&xs)
    });
    let specular = PixelMask::from_fn(w, h, |x, y| r.is_specular(x as f64, y as f64));

    Ok(Scene {
        left,
        right,
        gt_disparity,
        occlusion,
        specular,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub blob_count: usize,
    pub blob_radius: f64,
    /// Offset applied inside each blob, with a random sign per blob.
    pub blob_magnitude: f64,
    /// Area fraction of one contiguous rectangle overwritten with a constant.
    pub region_fraction: f64,
    /// Offset of the region's constant from the mean ground truth it covers.
    pub region_magnitude: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            blob_count: 0,
            blob_radius: 5.0,
            blob_magnitude: 10.0,
            region_fraction: 0.0,
            region_magnitude: 10.0,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.region_fraction) {
            return Err(Error::invalid_input("region_fraction must lie in [0, 1]"));
        }
        if !(self.blob_radius >= 0.0) || !self.blob_magnitude.is_finite() {
            return Err(Error::invalid_input("blob radius/magnitude must be finite, radius >= 0"));
        }
        Ok(())
    }
}

/// Corrupted disparity plus the pixels that were changed.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub disparity: DisparityMap,
    pub mask: PixelMask,
}

/// Overwrite disc-shaped blobs with `gt +- blob_magnitude` and optionally one
/// rectangle with a constant wrong value.
pub fn corrupt_disparity(gt: &DisparityMap, spec: &CorruptionSpec) -> Result<Corruption> {
    spec.validate()?;
    gt.ensure_channels(1, "ground truth disparity")?;
    let (w, h) = gt.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = gt.clone();
    let mut mask = PixelMask::filled(w, h, false);

    if spec.region_fraction > 0.0 {
        let s = spec.region_fraction.sqrt();
        let rw = ((w as f64 * s).round() as usize).clamp(1, w);
        let rh = ((h as f64 * s).round() as usize).clamp(1, h);
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut mean = 0.0;
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                mean += gt.get(x, y);
            }
        }
        let value = mean / (rw * rh) as f64 + sign * spec.region_magnitude;
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                out.set(x, y, value);
                mask.set(x, y, true);
            }
        }
    }

    let r = spec.blob_radius;
    for _ in 0..spec.blob_count {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x_lo = (cx - r).floor().max(0.0) as usize;
        let x_hi = ((cx + r).ceil() as usize).min(w - 1);
        let y_lo = (cy - r).floor().max(0.0) as usize;
        let y_hi = ((cy + r).ceil() as usize).min(h - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                    out.set(x, y, gt.get(x, y) + sign * spec.blob_magnitude);
                    mask.set(x, y, true);
                }
            }
        }
    }

    Ok(Corruption {
        disparity: out,
        mask,
    })
}

pub const ORACLE_EPS_DESC: f64 = 1e-6;

/// Exhaustive integer search minimising the descriptor residual
/// `|D_right(x + u) - D_left(x)|^2` over `u in [-range, range]`; ties go to
/// the smaller `|u|`.
pub fn brute_force_match(
    left: &ImageBuffer,
    right: &ImageBuffer,
    search_range: usize,
) -> Result<DisparityMap> {
    left.ensure_same_dims(right, "brute_force_match")?;
    let dl = descriptor_field(left, ORACLE_EPS_DESC)?;
    let dr = descriptor_field(right, ORACLE_EPS_DESC)?;
    Ok(match_descriptors(&dl, &dr, search_range))
}

fn match_descriptors(dl: &DescriptorField, dr: &DescriptorField, range: usize) -> DisparityMap {
    let (w, h) = dl.dims();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, value) in row.iter_mut().enumerate() {
            let src = dl.get(x, y);
            let mut best = (f64::INFINITY, 0i64);
            // candidate order 0, -1, +1, -2, +2, ... with strict improvement
            for k in 0..=range as i64 {
                for u in if k == 0 { vec![0] } else { vec![-k, k] } {
                    let xt = x as i64 + u;
                    if xt < 0 || xt >= w as i64 {
                        continue;
                    }
                    let tgt = dr.get(xt as usize, y);
                    let cost: f64 = src.iter().zip(tgt).map(|(a, b)| (a - b) * (a - b)).sum();
                    if cost < best.0 {
                        best = (cost, u);
                    }
                }
            }
            *value = best.1 as f64;
        }
    });
    ImageBuffer::new(w, h, 1, out).expect("shape fixed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::rmse_disparity;

    #[test]
    fn zero_disparity_unlit_scene() {
        let s = gen_scene(&SceneSpec::shifted(32, 24, 0.0, 3)).unwrap();
        assert_eq!(s.left, s.right);
        assert_eq!(s.occlusion.count(), 0);
    }

    #[test]
    fn constant_shift_scene() {
        let s = gen_scene(&SceneSpec::shifted(40, 20, 4.0, 1)).unwrap();
        assert!(s.gt_disparity.data().iter().all(|&u| u == -4.0));
        for y in 0..20 {
            for x in 0..40 {
                assert_eq!(s.occlusion.get(x, y), x < 4);
            }
        }
        // integer shift: right(x - 4) == left(x)
        for x in 4..40 {
            assert_eq!(s.right.pixel_rgb(x - 4, 7), s.left.pixel_rgb(x, 7));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let mut spec = SceneSpec::shifted(48, 32, 2.5, 11);
        spec.specular = SpecularBlobs {
            count: 3,
            radius: 4.0,
        };
        assert_eq!(gen_scene(&spec).unwrap(), gen_scene(&spec).unwrap());
        spec.seed = 12;
        assert_ne!(gen_scene(&spec).unwrap().left, gen_scene(&SceneSpec::shifted(48, 32, 2.5, 11)).unwrap().left);
    }

    #[test]
    fn rejects_excessive_disparity() {
        let spec = SceneSpec::shifted(32, 32, 9.0, 0);
        assert!(matches!(gen_scene(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn specular_blobs_are_white_in_both_views() {
        let mut spec = SceneSpec::shifted(64, 48, 3.0, 5);
        spec.specular = SpecularBlobs {
            count: 2,
            radius: 5.0,
        };
        let s = gen_scene(&spec).unwrap();
        assert!(s.specular.count() > 0);
        for y in 0..48 {
            for x in 3..64 {
                if s.specular.get(x, y) {
                    assert_eq!(s.left.pixel_rgb(x, y), [1.0; 3]);
                    assert_eq!(s.right.pixel_rgb(x - 3, y), [1.0; 3]);
                }
            }
        }
    }

    #[test]
    fn textures_stay_in_range_under_illumination() {
        for texture in [
            Texture::RandomSmooth,
            Texture::Checker { cell: 4.0 },
            Texture::Ramp,
        ] {
            let spec = SceneSpec {
                texture,
                illum_a: 1.3,
                illum_b: 0.05,
                ..SceneSpec::shifted(40, 30, 2.0, 9)
            };
            let s = gen_scene(&spec).unwrap();
            assert!(s.right.data().iter().all(|&v| v < 1.0 && v > 0.0));
        }
    }

    #[test]
    fn no_corruption_is_identity() {
        let gt = ImageBuffer::from_fn(20, 10, |x, _| -(x as f64) * 0.1);
        let c = corrupt_disparity(&gt, &CorruptionSpec::default()).unwrap();
        assert_eq!(c.disparity, gt);
        assert_eq!(c.mask.count(), 0);
    }

    #[test]
    fn single_blob_rmse_closed_form() {
        let gt = ImageBuffer::filled(40, 30, 1, -6.0);
        let spec = CorruptionSpec {
            blob_count: 1,
            blob_radius: 4.0,
            blob_magnitude: 10.0,
            seed: 2,
            ..CorruptionSpec::default()
        };
        let c = corrupt_disparity(&gt, &spec).unwrap();
        let area = c.mask.count() as f64;
        assert!(area > 0.0);
        let rmse = rmse_disparity(&c.disparity, &gt, &PixelMask::filled(40, 30, true)).unwrap();
        assert!((rmse - 10.0 * (area / 1200.0).sqrt()).abs() < 1e-12);
        assert_eq!(corrupt_disparity(&gt, &spec).unwrap(), c);
    }

    #[test]
    fn region_corruption_is_constant() {
        let gt = ImageBuffer::from_fn(40, 40, |x, _| -10.0 - 0.1 * x as f64);
        let spec = CorruptionSpec {
            region_fraction: 0.25,
            seed: 4,
            ..CorruptionSpec::default()
        };
        let c = corrupt_disparity(&gt, &spec).unwrap();
        assert_eq!(c.mask.count(), 400);
        let vals: Vec<f64> = (0..1600)
            .filter(|&i| c.mask.data()[i])
            .map(|i| c.disparity.data()[i])
            .collect();
        assert!(vals.iter().all(|&v| v == vals[0]));
    }

    #[test]
    fn oracle_identity_pair() {
        let s = gen_scene(&SceneSpec::shifted(24, 16, 0.0, 8)).unwrap();
        let g = s.left_gray();
        let m = brute_force_match(&g, &g, 4).unwrap();
        assert!(m.data().iter().all(|&u| u == 0.0));
    }
}
