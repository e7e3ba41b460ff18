//! Disparity refinement for rectified stereo pairs.
//!
//! Two stages operate on an initial disparity map:
//!
//! * [`ldr`] scores every pixel with a confidence built from local smoothness,
//!   photometric agreement, specularity and image borders, then fills low
//!   confidence pixels from their inlier neighbours.
//! * [`gdr`] minimises a variational energy with an illumination-invariant
//!   descriptor data term and Huber regularisation, coarse to fine.
//!
//! Disparities are signed: left pixel `x` matches right column `x + u`.
//!
//! [`synth`] generates scenes with exact ground truth, [`eval`] scores
//! results, and [`pipeline`] ties loading, refinement and reporting together.

pub mod error;
pub mod eval;
pub mod gdr;
pub mod image;
pub mod io;
pub mod ldr;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
