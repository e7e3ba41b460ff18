//! Disparity and depth errors with and without occluded pixels.

use disprefine::eval::{depth_to_disparity, evaluate, CameraRig, MaskMode};
use disprefine::image::{ImageBuffer, PixelMask};
use disprefine::synth::{gen_scene, DisparityModel, SceneSpec};

fn main() -> disprefine::Result<()> {
    let mut spec = SceneSpec::shifted(200, 150, 0.0, 9);
    spec.disparity = DisparityModel::TiltedPlane { base: 10.0, slope: 0.03 };
    let scene = gen_scene(&spec)?;
    let rig = CameraRig::new(700.0, 5.5)?;

    // depth in mm from the positive disparity magnitude
    let gt_depth = ImageBuffer::from_fn(200, 150, |x, y| {
        rig.focal_px * rig.baseline_mm / scene.gt_disparity.get(x, y).abs()
    });
    assert_eq!(
        depth_to_disparity(&gt_depth, &rig).get(50, 50),
        -scene.gt_disparity.get(50, 50)
    );

    // a prediction that is off by half a pixel on the left third
    let pred = ImageBuffer::from_fn(200, 150, |x, y| {
        scene.gt_disparity.get(x, y) + if x < 66 { 0.5 } else { 0.0 }
    });
    let everything = PixelMask::filled(200, 150, true);
    for (mode, mask) in [
        (MaskMode::OcclusionsIncluded, everything),
        (MaskMode::OcclusionsExcluded, scene.visible()),
    ] {
        let report = evaluate(&pred, &scene.gt_disparity, &mask, mode, Some((&gt_depth, &rig)))?;
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    }
    Ok(())
}
