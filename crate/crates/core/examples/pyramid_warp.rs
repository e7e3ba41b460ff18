//! Build an image pyramid and warp the right view onto the left one.

use disprefine::image::{build_pyramid, to_grayscale, warp_horizontal, ImageBuffer};
use disprefine::synth::{gen_scene, SceneSpec};

fn main() -> disprefine::Result<()> {
    let scene = gen_scene(&SceneSpec::shifted(360, 288, 7.0, 1))?;
    let left = to_grayscale(&scene.left)?;
    let right = to_grayscale(&scene.right)?;

    let pyramid = build_pyramid(&left, 4);
    for (i, level) in pyramid.levels().iter().enumerate() {
        println!("level {i}: {}x{}", level.width(), level.height());
    }
    // too many levels for a small image are trimmed with a warning
    let small = ImageBuffer::from_fn(16, 16, |x, y| ((x ^ y) & 1) as f64);
    println!("16x16 with 10 requested: {} levels", build_pyramid(&small, 10).len());

    let (warped, valid) = warp_horizontal(&right, &scene.gt_disparity)?;
    let mut err: f64 = 0.0;
    for y in 0..288 {
        for x in 0..360 {
            if valid.get(x, y) {
                err = err.max((warped.get(x, y) - left.get(x, y)).abs());
            }
        }
    }
    println!(
        "warped right matches left to {err:.2e}; {} samples fell outside",
        valid.not().count()
    );
    Ok(())
}
