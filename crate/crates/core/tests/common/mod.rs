#![allow(dead_code)]

use disprefine::image::PixelMask;
use disprefine::synth::{
    gen_scene, CorruptionSpec, DisparityModel, Scene, SceneSpec, SpecularBlobs, Texture,
};

/// Gently curved surface with a few highlights.
pub fn sinusoid_spec(width: usize, height: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        width,
        height,
        texture: Texture::RandomSmooth,
        disparity: DisparityModel::Sinusoid {
            base: 20.0,
            amplitude: 2.0,
            period: 128.0,
        },
        illum_a: 1.0,
        illum_b: 0.0,
        specular: SpecularBlobs { count: 6, radius: 6.0 },
        seed,
    }
}

pub fn standard_scene() -> Scene {
    gen_scene(&sinusoid_spec(256, 256, 3)).unwrap()
}

/// Blob corruption covering about a tenth of a 256x256 image.
pub fn standard_corruption() -> CorruptionSpec {
    CorruptionSpec {
        blob_count: 90,
        blob_radius: 5.0,
        blob_magnitude: 10.0,
        seed: 11,
        ..CorruptionSpec::default()
    }
}

/// Integer-shift scene under an affine illumination change.
pub fn lit_shift_scene(shift: f64, seed: u64) -> Scene {
    let mut spec = SceneSpec::shifted(256, 256, shift, seed);
    spec.illum_a = 1.3;
    spec.illum_b = 0.05;
    gen_scene(&spec).unwrap()
}

/// Visible pixels at least `margin` pixels from every image border.
pub fn interior(scene: &Scene, margin: usize) -> PixelMask {
    let (w, h) = scene.gt_disparity.dims();
    let visible = scene.visible();
    PixelMask::from_fn(w, h, |x, y| {
        visible.get(x, y) && x >= margin && y >= margin && x + margin < w && y + margin < h
    })
}
