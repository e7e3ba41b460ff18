//! Disparity and depth error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DisparityMap, ImageBuffer, PixelMask};

/// Disparities with magnitude at or below this are not triangulated.
pub const MIN_DISPARITY: f64 = 1e-3;

/// Rectified stereo rig used for disparity/depth conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRig {
    pub focal_px: f64,
    pub baseline_mm: f64,
}

impl CameraRig {
    pub fn new(focal_px: f64, baseline_mm: f64) -> Result<Self> {
        let rig = Self {
            focal_px,
            baseline_mm,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.baseline_mm > 0.0)
            || !self.focal_px.is_finite()
            || !self.baseline_mm.is_finite()
        {
            return Err(Error::invalid_config(format!(
                "camera rig needs positive focal length and baseline, got {} px / {} mm",
                self.focal_px, self.baseline_mm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    OcclusionsIncluded,
    OcclusionsExcluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_disparity_px: f64,
    pub rmse_depth_mm: Option<f64>,
    pub valid_pixel_count: usize,
    pub mask_mode: MaskMode,
}

/// Root mean square of `pred - gt` over the set pixels of `valid`.
pub fn rmse_disparity(pred: &DisparityMap, gt: &DisparityMap, valid: &PixelMask) -> Result<f64> {
    pred.ensure_same_dims(gt, "rmse_disparity")?;
    if !valid.matches(pred) {
        return Err(Error::invalid_input("rmse_disparity: mask dimension mismatch"));
    }
    masked_rmse(pred.data(), gt.data(), valid.data())
        .ok_or_else(|| Error::invalid_input("rmse_disparity: empty valid mask"))
}

fn masked_rmse(a: &[f64], b: &[f64], valid: &[bool]) -> Option<f64> {
    let (sum, n) = a
        .iter()
        .zip(b)
        .zip(valid)
        .filter(|(_, &ok)| ok)
        .fold((0.0, 0usize), |(s, n), ((p, g), _)| {
            let e = p - g;
            (s + e * e, n + 1)
        });
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Depth in millimetres from disparity magnitude. Returns the depth map and
/// the mask of pixels that could be triangulated; the rest hold 0.
pub fn disparity_to_depth(disp: &DisparityMap, rig: &CameraRig) -> (ImageBuffer, PixelMask) {
    let fb = rig.focal_px * rig.baseline_mm;
    let valid = PixelMask::from_vec(
        disp.width(),
        disp.height(),
        disp.data().iter().map(|u| u.abs() > MIN_DISPARITY).collect(),
    )
    .expect("shape preserved");
    let depth = disp.map(|u| if u.abs() > MIN_DISPARITY { fb / u.abs() } else { 0.0 });
    (depth, valid)
}

/// Inverse of [`disparity_to_depth`]; returns positive disparities. Pixels with
/// non-positive depth map to 0.
pub fn depth_to_disparity(depth: &ImageBuffer, rig: &CameraRig) -> DisparityMap {
    let fb = rig.focal_px * rig.baseline_mm;
    depth.map(|z| if z > 0.0 { fb / z } else { 0.0 })
}

/// Depth RMSE over `valid` pixels whose predicted disparity can be
/// triangulated and whose ground-truth depth is positive.
pub fn rmse_depth(
    pred: &DisparityMap,
    gt_depth: &ImageBuffer,
    rig: &CameraRig,
    valid: &PixelMask,
) -> Result<f64> {
    Ok(depth_error(pred, gt_depth, rig, valid)?.0)
}

/// Depth RMSE plus the number of pixels it was computed over.
pub(crate) fn depth_error(
    pred: &DisparityMap,
    gt_depth: &ImageBuffer,
    rig: &CameraRig,
    valid: &PixelMask,
) -> Result<(f64, usize)> {
    rig.validate()?;
    pred.ensure_same_dims(gt_depth, "rmse_depth")?;
    if !valid.matches(pred) {
        return Err(Error::invalid_input("rmse_depth: mask dimension mismatch"));
    }
    let (depth, triangulated) = disparity_to_depth(pred, rig);
    let effective: Vec<bool> = valid
        .data()
        .iter()
        .zip(triangulated.data())
        .zip(gt_depth.data())
        .map(|((&v, &t), &z)| v && t && z > 0.0)
        .collect();
    let n = effective.iter().filter(|&&v| v).count();
    let rmse = masked_rmse(depth.data(), gt_depth.data(), &effective)
        .ok_or_else(|| Error::invalid_input("rmse_depth: no valid pixels after masking"))?;
    Ok((rmse, n))
}

/// Metrics for one mask mode.
pub fn evaluate(
    pred: &DisparityMap,
    gt: &DisparityMap,
    valid: &PixelMask,
    mask_mode: MaskMode,
    depth: Option<(&ImageBuffer, &CameraRig)>,
) -> Result<EvalReport> {
    let rmse_disparity_px = rmse_disparity(pred, gt, valid)?;
    let rmse_depth_mm = match depth {
        Some((gt_depth, rig)) => Some(rmse_depth(pred, gt_depth, rig, valid)?),
        None => None,
    };
    Ok(EvalReport {
        rmse_disparity_px,
        rmse_depth_mm,
        valid_pixel_count: valid.count(),
        mask_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| -10.0 - x as f64 - 0.5 * y as f64)
    }

    #[test]
    fn rmse_examples() {
        let gt = ramp(4, 3);
        let all = PixelMask::filled(4, 3, true);
        assert_eq!(rmse_disparity(&gt, &gt, &all).unwrap(), 0.0);
        let shifted = gt.map(|v| v + 2.0);
        assert!((rmse_disparity(&shifted, &gt, &all).unwrap() - 2.0).abs() < 1e-12);

        let pred = ImageBuffer::new(2, 1, 1, vec![3.0, -4.0]).unwrap();
        let zero = ImageBuffer::zeros(2, 1, 1);
        let r = rmse_disparity(&pred, &zero, &PixelMask::filled(2, 1, true)).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let gt = ramp(3, 3);
        assert!(rmse_disparity(&gt, &gt, &PixelMask::filled(3, 3, false)).is_err());
    }

    #[test]
    fn depth_examples() {
        let rig = CameraRig::new(700.0, 5.0).unwrap();
        let d = ImageBuffer::new(3, 1, 1, vec![-35.0, 0.0, 70.0]).unwrap();
        let (z, ok) = disparity_to_depth(&d, &rig);
        assert!((z.get(0, 0) - 100.0).abs() < 1e-12);
        assert!(!ok.get(1, 0));
        assert_eq!(z.get(1, 0), 0.0);
        assert!((z.get(2, 0) - 50.0).abs() < 1e-12);
        assert!(CameraRig::new(0.0, 1.0).is_err());
    }

    #[test]
    fn rmse_depth_examples() {
        let rig = CameraRig::new(500.0, 4.0).unwrap();
        let gt_depth = ImageBuffer::from_fn(5, 4, |x, y| 60.0 + x as f64 + y as f64);
        let pred = depth_to_disparity(&gt_depth, &rig).map(|d| -d);
        let all = PixelMask::filled(5, 4, true);
        assert!(rmse_depth(&pred, &gt_depth, &rig, &all).unwrap() < 1e-9);

        let off = depth_to_disparity(&gt_depth.map(|z| z + 1.0), &rig);
        assert!((rmse_depth(&off, &gt_depth, &rig, &all).unwrap() - 1.0).abs() < 1e-9);

        let mut bad = pred.clone();
        bad.set(2, 2, -1.0);
        let mut mask = all.clone();
        mask.set(2, 2, false);
        assert!(rmse_depth(&bad, &gt_depth, &rig, &mask).unwrap() < 1e-9);
        assert!(rmse_depth(&bad, &gt_depth, &rig, &all).unwrap() > 1.0);

        let zeros = ImageBuffer::zeros(5, 4, 1);
        assert!(rmse_depth(&zeros, &gt_depth, &rig, &all).is_err());
    }

    #[test]
    fn report_json_keys() {
        let gt = ramp(3, 2);
        let r = evaluate(&gt, &gt, &PixelMask::filled(3, 2, true), MaskMode::OcclusionsExcluded, None)
            .unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["mask_mode"], "occlusions-excluded");
        assert_eq!(v["valid_pixel_count"], 6);
        assert!(v["rmse_depth_mm"].is_null());
        assert_eq!(v["rmse_disparity_px"], 0.0);
    }

    proptest! {
        #[test]
        fn mask_isolation(
            pred in proptest::collection::vec(-50.0..50.0f64, 24),
            gt in proptest::collection::vec(-50.0..50.0f64, 24),
            mask in proptest::collection::vec(any::<bool>(), 24),
            noise in proptest::collection::vec(-100.0..100.0f64, 24),
        ) {
            prop_assume!(mask.iter().any(|&m| m));
            let m = PixelMask::from_vec(6, 4, mask.clone()).unwrap();
            let p = ImageBuffer::new(6, 4, 1, pred.clone()).unwrap();
            let g = ImageBuffer::new(6, 4, 1, gt.clone()).unwrap();
            let base = rmse_disparity(&p, &g, &m).unwrap();
            let perturb = |v: &[f64]| -> ImageBuffer {
                let d = v.iter().zip(&noise).zip(&mask)
                    .map(|((&x, &n), &keep)| if keep { x } else { x + n })
                    .collect();
                ImageBuffer::new(6, 4, 1, d).unwrap()
            };
            prop_assert_eq!(rmse_disparity(&perturb(&pred), &perturb(&gt), &m).unwrap(), base);
            prop_assert_eq!(rmse_disparity(&g, &p, &m).unwrap(), base);
        }

        #[test]
        fn depth_round_trip(z in 1.0..5000.0f64, f in 100.0..2000.0f64, b in 0.5..100.0f64) {
            let rig = CameraRig::new(f, b).unwrap();
            let depth = ImageBuffer::filled(1, 1, 1, z);
            let disp = depth_to_disparity(&depth, &rig);
            prop_assume!(disp.get(0, 0) > MIN_DISPARITY);
            let (back, _) = disparity_to_depth(&disp, &rig);
            prop_assert!(((back.get(0, 0) - z) / z).abs() < 1e-9);
        }
    }
}
