//! Fill corrupted regions of a disparity map from confident neighbours.

use disprefine::eval::rmse_disparity;
use disprefine::ldr::{refine_local, LdrParams};
use disprefine::synth::{corrupt_disparity, gen_scene, CorruptionSpec, DisparityModel, SceneSpec, Texture};

fn main() -> disprefine::Result<()> {
    let spec = SceneSpec {
        texture: Texture::RandomSmooth,
        disparity: DisparityModel::Sinusoid {
            base: 20.0,
            amplitude: 2.0,
            period: 128.0,
        },
        ..SceneSpec::shifted(256, 256, 0.0, 3)
    };
    let scene = gen_scene(&spec)?;
    let visible = scene.visible();

    for blobs in [20, 50, 85] {
        let bad = corrupt_disparity(
            &scene.gt_disparity,
            &CorruptionSpec {
                blob_count: blobs,
                blob_radius: 5.0,
                blob_magnitude: 10.0,
                seed: 11,
                ..CorruptionSpec::default()
            },
        )?;
        let local = refine_local(&scene.left, &scene.right, &bad.disparity, &LdrParams::default())?;
        println!(
            "{blobs:>3} blobs ({:>4.1}% of pixels): RMSE {:.3} -> {:.3} px, {} outliers replaced",
            100.0 * bad.mask.count() as f64 / (256.0 * 256.0),
            rmse_disparity(&bad.disparity, &scene.gt_disparity, &visible)?,
            rmse_disparity(&local.disparity, &scene.gt_disparity, &visible)?,
            local.outliers,
        );
    }
    Ok(())
}
