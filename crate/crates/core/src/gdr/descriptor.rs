use rayon::prelude::*;

use crate::error::Result;
use crate::image::{reflect, ImageBuffer};

pub const DESCRIPTOR_LEN: usize = 8;

pub type Descriptor = [f64; DESCRIPTOR_LEN];

/// Neighbor offsets `(dx, dy)` of `x1..x8`, starting at mid-right and running
/// counter-clockwise through the top row (image y grows downwards).
pub const NEIGHBOR_OFFSETS: [(isize, isize); DESCRIPTOR_LEN] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Per-pixel illumination-invariant descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorField {
    width: usize,
    height: usize,
    data: Vec<Descriptor>,
}

impl DescriptorField {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &Descriptor {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn data(&self) -> &[Descriptor] {
        &self.data
    }

    #[inline]
    pub fn is_zero_at(&self, x: usize, y: usize) -> bool {
        self.get(x, y).iter().all(|&v| v == 0.0)
    }
}

/// Descriptor of a row-major 3x3 patch: absolute differences between the
/// centre and its eight neighbours, scaled to unit length. Patches whose
/// difference vector has norm `<= eps` map to the zero vector.
pub fn patch_descriptor(patch: &[f64; 9], eps: f64) -> Descriptor {
    let centre = patch[4];
    let mut a = [0.0; DESCRIPTOR_LEN];
    for (i, &(dx, dy)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let idx = ((1 + dy) * 3 + (1 + dx)) as usize;
        a[i] = (centre - patch[idx]).abs();
    }
    normalize(a, eps)
}

#[inline]
fn normalize(mut a: Descriptor, eps: f64) -> Descriptor {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > eps {
        a.iter_mut().for_each(|v| *v /= norm);
        a
    } else {
        [0.0; DESCRIPTOR_LEN]
    }
}

/// Descriptor of every pixel of a single-channel image; border pixels see
/// reflected neighbours.
pub fn descriptor_field(img: &ImageBuffer, eps: f64) -> Result<DescriptorField> {
    img.ensure_channels(1, "descriptor input")?;
    img.ensure_min_size(3, "descriptor_field")?;
    let (w, h) = img.dims();
    let mut data = vec![[0.0; DESCRIPTOR_LEN]; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let rows = [
            img.row(reflect(y as isize - 1, h)),
            img.row(y),
            img.row(reflect(y as isize + 1, h)),
        ];
        for (x, out) in row.iter_mut().enumerate() {
            let centre = rows[1][x];
            let mut a = [0.0; DESCRIPTOR_LEN];
            for (i, &(dx, dy)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let xx = if dx == 0 {
                    x
                } else {
                    reflect(x as isize + dx, w)
                };
                a[i] = (centre - rows[(1 + dy) as usize][xx]).abs();
            }
            *out = normalize(a, eps);
        }
    });
    Ok(DescriptorField {
        width: w,
        height: h,
        data,
    })
}

#[inline]
pub(crate) fn squared_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_gives_zero_descriptors() {
        let f = descriptor_field(&ImageBuffer::filled(5, 4, 1, 0.3), 1e-6).unwrap();
        assert!(f.data().iter().all(|d| d.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_bright_neighbour() {
        let mut p = [0.0; 9];
        p[5] = 1.0; // mid-right
        assert_eq!(patch_descriptor(&p, 1e-6), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut p = [0.0; 9];
        p[0] = 1.0; // top-left
        assert_eq!(patch_descriptor(&p, 1e-6)[3], 1.0);
    }

    #[test]
    fn field_matches_patch_form_in_interior() {
        let img = ImageBuffer::from_fn(6, 5, |x, y| ((x * 7 + y * 13) % 11) as f64 / 10.0);
        let f = descriptor_field(&img, 1e-6).unwrap();
        let mut patch = [0.0; 9];
        for j in 0..3 {
            for i in 0..3 {
                patch[j * 3 + i] = img.get(2 + i - 1, 3 + j - 1);
            }
        }
        assert_eq!(f.get(2, 3), &patch_descriptor(&patch, 1e-6));
    }

    #[test]
    fn affine_example() {
        let p = [0.1, 0.7, 0.3, 0.9, 0.5, 0.2, 0.4, 0.8, 0.6];
        let q = p.map(|v| 2.7 * v + 0.3);
        let (dp, dq) = (patch_descriptor(&p, 1e-6), patch_descriptor(&q, 1e-6));
        for i in 0..8 {
            assert!((dp[i] - dq[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn too_small() {
        assert!(descriptor_field(&ImageBuffer::zeros(2, 5, 1), 1e-6).is_err());
        assert!(descriptor_field(&ImageBuffer::zeros(3, 3, 3), 1e-6).is_err());
    }

    proptest! {
        #[test]
        fn unit_or_zero_norm(vals in proptest::collection::vec(0.0..1.0f64, 30)) {
            let img = ImageBuffer::new(6, 5, 1, vals).unwrap();
            let f = descriptor_field(&img, 1e-6).unwrap();
            for d in f.data() {
                let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-6);
                prop_assert!(d.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn affine_invariance(
            patch in proptest::array::uniform9(0.0..1.0f64),
            a in 0.2..5.0f64,
            b in -0.5..0.5f64,
        ) {
            let dp = patch_descriptor(&patch, 1e-6);
            let dq = patch_descriptor(&patch.map(|v| a * v + b), 1e-6);
            for i in 0..8 {
                prop_assert!((dp[i] - dq[i]).abs() < 1e-6);
            }
        }
    }
}
