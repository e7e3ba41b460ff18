//! Score an initial disparity with each confidence cue and show how well the
//! combined map separates corrupted pixels from clean ones.
//!
//! Writes the maps as PNGs to the directory given as the first argument
//! (default: a temp dir).

use std::path::PathBuf;

use disprefine::image::to_grayscale;
use disprefine::io::write_png_gray;
use disprefine::ldr::{
    border_mask, final_confidence, photo_confidence, smoothness_confidence, specular_mask,
    LdrParams,
};
use disprefine::synth::{corrupt_disparity, gen_scene, CorruptionSpec, DisparityModel, SceneSpec};

fn main() -> disprefine::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("disprefine-confidence"));
    std::fs::create_dir_all(&out).expect("create output dir");

    let mut spec = SceneSpec::shifted(256, 256, 0.0, 11);
    spec.disparity = DisparityModel::TiltedPlane { base: 12.0, slope: 0.02 };
    spec.specular.count = 5;
    spec.specular.radius = 8.0;
    let scene = gen_scene(&spec)?;
    let bad = corrupt_disparity(
        &scene.gt_disparity,
        &CorruptionSpec {
            blob_count: 40,
            seed: 2,
            ..CorruptionSpec::default()
        },
    )?;
    let disp = &bad.disparity;

    let p = LdrParams::default();
    let cs = smoothness_confidence(disp, &p)?;
    let cp = photo_confidence(&to_grayscale(&scene.left)?, &to_grayscale(&scene.right)?, disp, &p)?;
    let ms = specular_mask(&scene.left, &p)?;
    let mb = border_mask(disp)?;
    let cf = final_confidence(&cs, &cp, &ms, &mb)?;

    let mut caught = 0;
    let mut flagged_clean = 0;
    for (i, &c) in cf.data().iter().enumerate() {
        let corrupted = bad.mask.data()[i];
        if c < p.th_f && corrupted {
            caught += 1;
        } else if c < p.th_f {
            flagged_clean += 1;
        }
    }
    println!("corrupted pixels flagged: {caught}/{}", bad.mask.count());
    println!("clean pixels flagged:     {flagged_clean}");
    println!(
        "specular: {} masked, border: {} masked",
        ms.not().count(),
        mb.not().count()
    );

    write_png_gray(out.join("smoothness.png"), &cs)?;
    write_png_gray(out.join("photometric.png"), &cp)?;
    write_png_gray(out.join("final.png"), &cf)?;
    println!("maps written to {}", out.display());
    Ok(())
}
