use rayon::prelude::*;

use super::{GdrParams, LinearizedDataTerm};
use crate::error::{Error, Result};
use crate::image::{DisparityMap, ImageBuffer};

/// Primal and dual iterates of the Huber-regularised problem on one grid.
///
/// Kept alive across warps on a pyramid level so the dual field does not have
/// to be rebuilt after every re-linearisation.
#[derive(Debug, Clone)]
pub(crate) struct PrimalDual {
    width: usize,
    height: usize,
    u: Vec<f64>,
    u_bar: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl PrimalDual {
    pub(crate) fn new(u_init: &DisparityMap) -> Self {
        let n = u_init.len();
        Self {
            width: u_init.width(),
            height: u_init.height(),
            u: u_init.data().to_vec(),
            u_bar: u_init.data().to_vec(),
            px: vec![0.0; n],
            py: vec![0.0; n],
        }
    }

    pub(crate) fn disparity(&self) -> DisparityMap {
        ImageBuffer::new(self.width, self.height, 1, self.u.clone()).expect("shape fixed")
    }

    pub(crate) fn into_disparity(self) -> DisparityMap {
        ImageBuffer::new(self.width, self.height, 1, self.u).expect("shape fixed")
    }

    pub(crate) fn iterate(&mut self, dt: &LinearizedDataTerm, p: &GdrParams, iters: usize) {
        let w = self.width;
        let h = self.height;
        let (tau, sigma, eps) = (p.tau, p.sigma, p.eps_huber);
        let a = dt.a.data();
        let b = dt.b.data();
        let u0 = dt.u0.data();

        for _ in 0..iters {
            // dual ascent on the Huber conjugate, then projection onto the unit ball
            let u_bar = &self.u_bar;
            self.px
                .par_chunks_mut(w)
                .zip(self.py.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (px, py))| {
                    let row = &u_bar[y * w..(y + 1) * w];
                    let below = (y + 1 < h).then(|| &u_bar[(y + 1) * w..(y + 2) * w]);
                    for x in 0..w {
                        let gx = if x + 1 < w { row[x + 1] - row[x] } else { 0.0 };
                        let gy = below.map_or(0.0, |r| r[x] - row[x]);
                        let qx = (px[x] + sigma * gx) / (1.0 + sigma * eps);
                        let qy = (py[x] + sigma * gy) / (1.0 + sigma * eps);
                        let scale = (qx * qx + qy * qy).sqrt().max(1.0);
                        px[x] = qx / scale;
                        py[x] = qy / scale;
                    }
                });

            // primal descent through the proximal map of the quadratic data term
            let (px, py) = (&self.px, &self.py);
            self.u
                .par_chunks_mut(w)
                .zip(self.u_bar.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (u, u_bar))| {
                    let off = y * w;
                    for x in 0..w {
                        let i = off + x;
                        let mut div = 0.0;
                        if x + 1 < w {
                            div += px[i];
                        }
                        if x > 0 {
                            div -= px[i - 1];
                        }
                        if y + 1 < h {
                            div += py[i];
                        }
                        if y > 0 {
                            div -= py[i - w];
                        }
                        let v = u[x] + tau * div;
                        let next = (v + 2.0 * tau * (a[i] * u0[i] - b[i])) / (1.0 + 2.0 * tau * a[i]);
                        u_bar[x] = 2.0 * next - u[x];
                        u[x] = next;
                    }
                });
        }
    }
}

/// Run `p.inner_iters` primal-dual iterations on the convex surrogate
/// `sum a (u - u0)^2 + 2 b (u - u0) + huber(|grad u|)`, starting from `u_init`
/// with a zero dual field.
pub fn primal_dual_solve(
    dt: &LinearizedDataTerm,
    u_init: &DisparityMap,
    p: &GdrParams,
) -> Result<DisparityMap> {
    p.check_step_sizes()?;
    if !dt.a.same_dims(u_init) {
        return Err(Error::invalid_input(
            "primal_dual_solve: data term and initial disparity differ in size",
        ));
    }
    let mut state = PrimalDual::new(u_init);
    state.iterate(dt, p, p.inner_iters);
    Ok(state.into_disparity())
}
