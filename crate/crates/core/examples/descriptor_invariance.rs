//! The matching descriptor ignores affine intensity changes. Compare the
//! descriptors of a patch before and after `a * I + b`.

use disprefine::gdr::{descriptor_field, patch_descriptor};
use disprefine::image::ImageBuffer;
use rand::{Rng, SeedableRng};

fn main() -> disprefine::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let patch: [f64; 9] = std::array::from_fn(|_| rng.gen::<f64>());
        let a = rng.gen_range(0.2..5.0);
        let b = rng.gen_range(-0.5..0.5);
        let lit = patch.map(|v| a * v + b);
        let d0 = patch_descriptor(&patch, 1e-6);
        let d1 = patch_descriptor(&lit, 1e-6);
        for (x, y) in d0.iter().zip(&d1) {
            worst = worst.max((x - y).abs());
        }
    }
    println!("max component change over 10000 random patches: {worst:.2e}");

    let flat = ImageBuffer::filled(5, 5, 1, 0.3);
    let field = descriptor_field(&flat, 1e-6)?;
    println!("flat image gives zero descriptors: {}", field.is_zero_at(2, 2));
    Ok(())
}
