//! Global disparity refinement.
//!
//! Minimises
//!
//! ```text
//! E(u) = lambda * sum_x |D_t(x + u) - D_s(x)|^2 + sum_x huber(|grad u(x)|, eps)
//! ```
//!
//! where `D` is the normalised absolute-difference descriptor of a 3x3 patch.
//! The descriptor term is linearised around the current disparity at every
//! warp; each linearisation is a convex per-pixel quadratic handled by a
//! first-order primal-dual scheme. Large displacements are reached by
//! coarse-to-fine warping over an image pyramid.

mod descriptor;
mod solver;

pub use descriptor::{
    descriptor_field, patch_descriptor, Descriptor, DescriptorField, DESCRIPTOR_LEN,
    NEIGHBOR_OFFSETS,
};
pub use solver::primal_dual_solve;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    build_pyramid, downsample_half, reflect, resize_bilinear, to_grayscale, warp_horizontal,
    DisparityMap, ImageBuffer, PixelMask,
};
use descriptor::squared_distance;
use solver::PrimalDual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdrParams {
    /// Weight of the descriptor data term.
    pub lambda: f64,
    /// Huber threshold.
    pub eps_huber: f64,
    /// Warping iterations per pyramid level.
    pub warps: usize,
    /// Requested pyramid levels.
    pub levels: usize,
    /// Primal-dual iterations per warp.
    pub inner_iters: usize,
    pub tau: f64,
    pub sigma: f64,
    /// Flat-patch guard on the descriptor norm.
    pub eps_desc: f64,
    pub data_gradient: DataGradient,
}

impl Default for GdrParams {
    fn default() -> Self {
        let step = 1.0 / 8f64.sqrt();
        Self {
            lambda: 0.5,
            eps_huber: 0.1,
            warps: 50,
            levels: 4,
            inner_iters: 10,
            tau: step,
            sigma: step,
            eps_desc: 1e-6,
            data_gradient: DataGradient::ShiftDifference,
        }
    }
}

impl GdrParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("eps_huber", self.eps_huber),
            ("tau", self.tau),
            ("sigma", self.sigma),
            ("eps_desc", self.eps_desc),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("warps", self.warps),
            ("levels", self.levels),
            ("inner_iters", self.inner_iters),
        ] {
            if v == 0 {
                return Err(Error::invalid_config(format!("{name} must be at least 1")));
            }
        }
        self.check_step_sizes()
    }

    pub(crate) fn check_step_sizes(&self) -> Result<()> {
        // |grad|^2 <= 8 for forward differences on a 2-D grid
        if self.tau * self.sigma * 8.0 > 1.0 + 1e-12 {
            return Err(Error::invalid_config(format!(
                "step sizes violate tau * sigma * 8 <= 1 (tau = {}, sigma = {})",
                self.tau, self.sigma
            )));
        }
        Ok(())
    }
}

/// Huber penalty: `r^2 / (2 eps)` for `|r| <= eps`, `|r| - eps / 2` beyond.
#[inline]
pub fn huber(r: f64, eps: f64) -> f64 {
    let a = r.abs();
    if a <= eps {
        r * r / (2.0 * eps)
    } else {
        a - 0.5 * eps
    }
}

/// Derivative of [`huber`] with respect to `r`.
#[inline]
pub fn huber_derivative(r: f64, eps: f64) -> f64 {
    if r.abs() <= eps {
        r / eps
    } else {
        r.signum()
    }
}

/// Sum of `huber(|grad u|)` with forward differences and zero Neumann boundary.
pub fn huber_tv(u: &DisparityMap, eps: f64) -> f64 {
    let (w, h) = u.dims();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let c = u.get(x, y);
            let gx = if x + 1 < w { u.get(x + 1, y) - c } else { 0.0 };
            let gy = if y + 1 < h { u.get(x, y + 1) - c } else { 0.0 };
            total += huber((gx * gx + gy * gy).sqrt(), eps);
        }
    }
    total
}

/// Pixels whose 3x3 neighbourhood of warped samples is entirely valid, i.e.
/// whose warped descriptor is uncontaminated by out-of-image samples.
fn descriptor_support(valid: &PixelMask) -> PixelMask {
    let (w, h) = valid.dims();
    PixelMask::from_fn(w, h, |x, y| {
        (-1..=1).all(|dy| {
            (-1..=1).all(|dx| {
                valid.get(
                    reflect(x as isize + dx, w),
                    reflect(y as isize + dy, h),
                )
            })
        })
    })
}

/// The two parts of the objective at a given disparity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// Unweighted descriptor residual `sum |D_t(x + u) - D_s(x)|^2`.
    pub data: f64,
    pub smoothness: f64,
    pub lambda: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.lambda * self.data + self.smoothness
    }
}

/// Objective value split into data and smoothness parts. Pixels whose warped
/// descriptor touches an out-of-image sample contribute no data energy.
pub fn energy_terms(
    left_desc: &DescriptorField,
    right: &ImageBuffer,
    disp: &DisparityMap,
    p: &GdrParams,
) -> Result<EnergyTerms> {
    right.ensure_channels(1, "right intensity")?;
    right.ensure_same_dims(disp, "energy")?;
    if left_desc.dims() != right.dims() {
        return Err(Error::invalid_input("energy: descriptor field dimension mismatch"));
    }
    let (warped, valid) = warp_horizontal(right, disp)?;
    let target = descriptor_field(&warped, p.eps_desc)?;
    let support = descriptor_support(&valid);
    let data = target
        .data()
        .iter()
        .zip(left_desc.data())
        .zip(support.data())
        .filter(|(_, &ok)| ok)
        .map(|((t, s), _)| squared_distance(t, s))
        .sum();
    Ok(EnergyTerms {
        data,
        smoothness: huber_tv(disp, p.eps_huber),
        lambda: p.lambda,
    })
}

pub fn energy(
    left_desc: &DescriptorField,
    right: &ImageBuffer,
    disp: &DisparityMap,
    p: &GdrParams,
) -> Result<f64> {
    energy_terms(left_desc, right, disp, p).map(|e| e.total())
}

/// Energy of `disp` for a pair of RGB images.
pub fn energy_rgb(
    color_left: &ImageBuffer,
    color_right: &ImageBuffer,
    disp: &DisparityMap,
    p: &GdrParams,
) -> Result<f64> {
    let left = to_grayscale(color_left)?;
    let right = to_grayscale(color_right)?;
    let desc = descriptor_field(&left, p.eps_desc)?;
    energy(&desc, &right, disp, p)
}

/// First-order expansion of the data term around `u0`:
/// `lambda |rho0 + g (u - u0)|^2 = const + a (u - u0)^2 + 2 b (u - u0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedDataTerm {
    /// `lambda |g|^2`, non-negative.
    pub a: ImageBuffer,
    /// `lambda rho0 . g`.
    pub b: ImageBuffer,
    pub u0: DisparityMap,
}

impl LinearizedDataTerm {
    pub fn new(a: ImageBuffer, b: ImageBuffer, u0: DisparityMap) -> Result<Self> {
        a.ensure_same_dims(&b, "data term")?;
        a.ensure_same_dims(&u0, "data term")?;
        if a.channels() != 1 || b.channels() != 1 || u0.channels() != 1 {
            return Err(Error::invalid_input("data term fields must be single-channel"));
        }
        if a.data().iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid_input("quadratic coefficient must be non-negative"));
        }
        Ok(Self { a, b, u0 })
    }

    /// Data term with no pull at all; the regulariser governs alone.
    pub fn zero(u0: &DisparityMap) -> Self {
        let (w, h) = u0.dims();
        Self {
            a: ImageBuffer::zeros(w, h, 1),
            b: ImageBuffer::zeros(w, h, 1),
            u0: u0.clone(),
        }
    }
}

/// How the derivative of the warped target descriptor with respect to the
/// disparity is estimated during linearisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataGradient {
    /// Central difference in the disparity itself: describe the target warped
    /// by `u0 + 1/2` and `u0 - 1/2` and take the difference. Consistent with
    /// the energy, which describes the warped image.
    #[default]
    ShiftDifference,
    /// Central horizontal difference of the descriptor field of the target
    /// warped by `u0`.
    SpatialDifference,
}

/// Warp the target by `u0`, describe it, and expand the descriptor residual
/// to first order in `u`.
///
/// Pixels whose descriptors (or the samples used for the derivative) touch an
/// out-of-image warp get `a = b = 0`, as do pixels where both descriptors are
/// zero.
pub fn linearize_data_term(
    src_desc: &DescriptorField,
    tgt_gray: &ImageBuffer,
    u0: &DisparityMap,
    p: &GdrParams,
) -> Result<LinearizedDataTerm> {
    tgt_gray.ensure_channels(1, "target intensity")?;
    tgt_gray.ensure_same_dims(u0, "linearize_data_term")?;
    if src_desc.dims() != tgt_gray.dims() {
        return Err(Error::invalid_input(
            "linearize_data_term: descriptor field dimension mismatch",
        ));
    }
    let (w, h) = u0.dims();
    let (warped, valid) = warp_horizontal(tgt_gray, u0)?;
    let target = descriptor_field(&warped, p.eps_desc)?;

    // descriptors whose difference approximates d D_t / du, plus the spacing
    let (fwd, bwd, support, spacing) = match p.data_gradient {
        DataGradient::ShiftDifference => {
            let (up, up_valid) = warp_horizontal(tgt_gray, &u0.map(|v| v + 0.5))?;
            let (down, down_valid) = warp_horizontal(tgt_gray, &u0.map(|v| v - 0.5))?;
            let support = descriptor_support(&valid.and(&up_valid).and(&down_valid));
            (
                descriptor_field(&up, p.eps_desc)?,
                descriptor_field(&down, p.eps_desc)?,
                support,
                1.0,
            )
        }
        DataGradient::SpatialDifference => {
            let inner = descriptor_support(&valid);
            let support = PixelMask::from_fn(w, h, |x, y| {
                inner.get(x, y)
                    && inner.get(reflect(x as isize - 1, w), y)
                    && inner.get(reflect(x as isize + 1, w), y)
            });
            (target.clone(), target.clone(), support, 2.0)
        }
    };
    let spatial = p.data_gradient == DataGradient::SpatialDifference;
    let lambda = p.lambda;

    let mut a = vec![0.0; w * h];
    let mut b = vec![0.0; w * h];
    a.par_chunks_mut(w)
        .zip(b.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (a_row, b_row))| {
            for x in 0..w {
                if !support.get(x, y) || (target.is_zero_at(x, y) && src_desc.is_zero_at(x, y)) {
                    continue;
                }
                let (hi, lo) = if spatial {
                    (
                        fwd.get(reflect(x as isize + 1, w), y),
                        bwd.get(reflect(x as isize - 1, w), y),
                    )
                } else {
                    (fwd.get(x, y), bwd.get(x, y))
                };
                let src = src_desc.get(x, y);
                let tgt = target.get(x, y);
                let mut gg = 0.0;
                let mut rg = 0.0;
                for k in 0..DESCRIPTOR_LEN {
                    let g = (hi[k] - lo[k]) / spacing;
                    gg += g * g;
                    rg += (tgt[k] - src[k]) * g;
                }
                a_row[x] = lambda * gg;
                b_row[x] = lambda * rg;
            }
        });

    Ok(LinearizedDataTerm {
        a: ImageBuffer::new(w, h, 1, a)?,
        b: ImageBuffer::new(w, h, 1, b)?,
        u0: u0.clone(),
    })
}

/// Halve a disparity map spatially and in value.
pub fn downsample_disparity(u: &DisparityMap) -> Result<DisparityMap> {
    Ok(downsample_half(u)?.map(|v| 0.5 * v))
}

/// Bilinearly upsample a disparity map to `width x height` and double its values.
pub fn upsample_disparity(u: &DisparityMap, width: usize, height: usize) -> DisparityMap {
    resize_bilinear(u, width, height).map(|v| 2.0 * v)
}

/// Coarse-to-fine refinement on RGB images.
pub fn refine_global(
    color_left: &ImageBuffer,
    color_right: &ImageBuffer,
    u_init: &DisparityMap,
    p: &GdrParams,
) -> Result<DisparityMap> {
    color_left.ensure_channels(3, "left image")?;
    color_right.ensure_channels(3, "right image")?;
    let left = to_grayscale(color_left)?;
    let right = to_grayscale(color_right)?;
    refine_global_gray(&left, &right, u_init, p)
}

/// Coarse-to-fine refinement on intensity images.
pub fn refine_global_gray(
    left: &ImageBuffer,
    right: &ImageBuffer,
    u_init: &DisparityMap,
    p: &GdrParams,
) -> Result<DisparityMap> {
    p.validate()?;
    left.ensure_channels(1, "left intensity")?;
    right.ensure_channels(1, "right intensity")?;
    u_init.ensure_channels(1, "initial disparity")?;
    left.ensure_same_dims(right, "refine_global")?;
    left.ensure_same_dims(u_init, "refine_global")?;
    left.ensure_min_size(3, "refine_global")?;
    if !u_init.is_finite() {
        return Err(Error::invalid_input("initial disparity contains NaN or Inf"));
    }

    let left_pyr = build_pyramid(left, p.levels);
    let right_pyr = build_pyramid(right, left_pyr.len());
    let levels = left_pyr.len();

    let mut u = u_init.clone();
    for _ in 1..levels {
        u = downsample_disparity(&u)?;
    }

    for level in (0..levels).rev() {
        let src = left_pyr.level(level);
        let tgt = right_pyr.level(level);
        if u.dims() != src.dims() {
            u = upsample_disparity(&u, src.width(), src.height());
        }
        let src_desc = descriptor_field(src, p.eps_desc)?;
        let mut state = PrimalDual::new(&u);
        for _ in 0..p.warps {
            let current = state.disparity();
            let dt = linearize_data_term(&src_desc, tgt, &current, p)?;
            state.iterate(&dt, p, p.inner_iters);
        }
        u = state.into_disparity();
        log::debug!("level {level} ({}x{}) done", src.width(), src.height());
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_values() {
        assert_eq!(huber(0.0, 0.1), 0.0);
        assert!((huber(0.1, 0.1) - 0.05).abs() < 1e-15);
        assert!((huber(1.0, 0.1) - 0.95).abs() < 1e-15);
        assert!((huber(-1.0, 0.1) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn huber_smooth_at_threshold() {
        let eps = 0.1;
        let d = 1e-7;
        assert!((huber(eps - d, eps) - huber(eps + d, eps)).abs() < 2.0 * d);
        assert!((huber_derivative(eps - d, eps) - huber_derivative(eps + d, eps)).abs() < 1e-5);
    }

    #[test]
    fn default_params() {
        let p = GdrParams::default();
        p.validate().unwrap();
        assert_eq!((p.lambda, p.eps_huber, p.warps, p.levels), (0.5, 0.1, 50, 4));
        let bad = GdrParams {
            warps: 0,
            ..GdrParams::default()
        };
        assert!(bad.validate().is_err());
    }

    fn texture(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.4 + 0.15 * (0.9 * x).sin() * (0.7 * y).cos() + 0.1 * (0.31 * x + 0.53 * y).sin()
        })
    }

    #[test]
    fn energy_zero_at_identity() {
        let img = texture(16, 12);
        let desc = descriptor_field(&img, 1e-6).unwrap();
        let e = energy(&desc, &img, &ImageBuffer::zeros(16, 12, 1), &GdrParams::default()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn constant_disparity_has_no_smoothness_cost() {
        let l = texture(16, 12);
        let r = texture(16, 12).map(|v| 1.0 - v * v);
        let desc = descriptor_field(&l, 1e-6).unwrap();
        let t = energy_terms(&desc, &r, &ImageBuffer::filled(16, 12, 1, 2.0), &GdrParams::default())
            .unwrap();
        assert_eq!(t.smoothness, 0.0);
        assert!(t.data > 0.0);
    }

    #[test]
    fn linearization_examples() {
        let p = GdrParams::default();
        let img = texture(14, 10);
        let desc = descriptor_field(&img, 1e-6).unwrap();
        let dt = linearize_data_term(&desc, &img, &ImageBuffer::zeros(14, 10, 1), &p).unwrap();
        assert!(dt.b.data().iter().all(|&v| v == 0.0));
        assert!(dt.a.data().iter().all(|&v| v >= 0.0));

        let flat = ImageBuffer::filled(14, 10, 1, 0.5);
        let desc = descriptor_field(&flat, 1e-6).unwrap();
        let dt = linearize_data_term(&desc, &flat, &ImageBuffer::filled(14, 10, 1, 0.3), &p).unwrap();
        assert!(dt.a.data().iter().all(|&v| v == 0.0));
        assert!(dt.b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linearization_zero_where_warp_invalid() {
        let p = GdrParams::default();
        let img = texture(14, 10);
        let desc = descriptor_field(&img, 1e-6).unwrap();
        let dt = linearize_data_term(&desc, &img, &ImageBuffer::filled(14, 10, 1, 3.0), &p).unwrap();
        for y in 0..10 {
            for x in 10..14 {
                assert_eq!(dt.a.get(x, y), 0.0);
                assert_eq!(dt.b.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn disparity_rescaling() {
        let u = ImageBuffer::filled(16, 12, 1, 3.0);
        let down = downsample_disparity(&u).unwrap();
        assert_eq!(down.dims(), (8, 6));
        assert!(down.data().iter().all(|v| (v - 1.5).abs() < 1e-12));
        let up = upsample_disparity(&down, 16, 12);
        assert!(up.data().iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn refine_rejects_mismatch() {
        let a = ImageBuffer::zeros(16, 16, 1);
        let b = ImageBuffer::zeros(16, 15, 1);
        assert!(refine_global_gray(&a, &a, &b, &GdrParams::default()).is_err());
        let nan = ImageBuffer::filled(16, 16, 1, f64::NAN);
        assert!(refine_global_gray(&a, &a, &nan, &GdrParams::default()).is_err());
    }
}
