//! The primal-dual solver on its own: with `a = 1`, `b = 0` the linearised
//! problem is Huber-regularised denoising of `u0`.

use disprefine::gdr::{huber_tv, primal_dual_solve, GdrParams, LinearizedDataTerm};
use disprefine::image::ImageBuffer;
use rand::{Rng, SeedableRng};

fn main() -> disprefine::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let clean = ImageBuffer::from_fn(96, 64, |x, _| if x < 48 { 2.0 } else { 6.0 });
    let noisy = ImageBuffer::from_fn(96, 64, |x, y| clean.get(x, y) + rng.gen_range(-0.8..0.8));

    let weight = 0.3;
    let a = ImageBuffer::filled(96, 64, 1, weight);
    let b = ImageBuffer::zeros(96, 64, 1);
    let dt = LinearizedDataTerm::new(a, b, noisy.clone())?;

    let rms = |u: &ImageBuffer| {
        let s: f64 = u.data().iter().zip(clean.data()).map(|(p, q)| (p - q).powi(2)).sum();
        (s / u.len() as f64).sqrt()
    };
    println!("noisy:    rms error {:.3}, Huber TV {:.1}", rms(&noisy), huber_tv(&noisy, 0.1));
    for iters in [10, 50, 200] {
        let p = GdrParams {
            inner_iters: iters,
            ..GdrParams::default()
        };
        let u = primal_dual_solve(&dt, &noisy, &p)?;
        println!("{iters:>3} iters: rms error {:.3}, Huber TV {:.1}", rms(&u), huber_tv(&u, 0.1));
    }
    Ok(())
}
