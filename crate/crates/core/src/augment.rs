//! Class balancing by horizontal flip, rotation and scaling.
//!
//! Rotation and scaling are inverse-mapped about the image center in
//! Cartesian (y-up) coordinates with bilinear sampling. A sample is inside the
//! image when it falls within the pixel footprint `[-0.5, W - 0.5]`; anything
//! beyond is filled with black.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::imgcore::{sample_bilinear, to_u8, ImageRgb};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub target_per_class: usize,
    pub rotation_angles: Vec<f64>,
    pub scale_factors: Vec<f64>,
    pub enable_flip: bool,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            target_per_class: 1000,
            rotation_angles: vec![90.0, 180.0, 270.0, 15.0, -15.0, 30.0, -30.0],
            scale_factors: vec![0.9, 1.1, 1.25],
            enable_flip: true,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.scale_factors.iter().find(|&&s| !(s > 0.0)) {
            return arg_err(format!("scale factor must be positive, got {s}"));
        }
        if !self.enable_flip && self.rotation_angles.is_empty() && self.scale_factors.is_empty() {
            return arg_err("augmentation needs at least one enabled operation");
        }
        Ok(())
    }
}

/// One drawn augmentation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    Flip,
    Rotate(f64),
    Scale(f64),
}

impl AugmentOp {
    pub fn apply(self, img: &ImageRgb) -> Result<ImageRgb> {
        match self {
            AugmentOp::Flip => Ok(flip_horizontal(img)),
            AugmentOp::Rotate(theta) => Ok(rotate(img, theta)),
            AugmentOp::Scale(s) => scale(img, s),
        }
    }
}

/// Output pixel `(x, y)` takes input pixel `(W - 1 - x, y)`.
pub fn flip_horizontal(img: &ImageRgb) -> ImageRgb {
    let w = img.width();
    ImageRgb::from_fn(w, img.height(), |x, y| img.pixel(w - 1 - x, y))
}

fn inverse_map(img: &ImageRgb, src: impl Fn(f64, f64) -> (f64, f64)) -> ImageRgb {
    let (w, h) = (img.width(), img.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    ImageRgb::from_fn(w, h, |x, y| {
        // Cartesian offsets from the center, y pointing up
        let (u, v) = src(x as f64 - cx, cy - y as f64);
        let sx = cx + u;
        let sy = cy - v;
        if sx < -0.5 || sy < -0.5 || sx > w as f64 - 0.5 || sy > h as f64 - 0.5 {
            return [0, 0, 0];
        }
        [0, 1, 2].map(|c| to_u8(sample_bilinear(img, sx, sy, c)))
    })
}

/// Rotates by `theta` degrees. The forward map is
/// `x' = x cos θ + y sin θ`, `y' = -x sin θ + y cos θ`; each output pixel is
/// pulled from the inverse of that map.
pub fn rotate(img: &ImageRgb, theta: f64) -> ImageRgb {
    if theta == 0.0 {
        return img.clone();
    }
    let (s, c) = theta.to_radians().sin_cos();
    inverse_map(img, |xp, yp| (xp * c - yp * s, xp * s + yp * c))
}

/// Scales content by `s` about the center, keeping the original frame.
pub fn scale(img: &ImageRgb, s: f64) -> Result<ImageRgb> {
    if !(s > 0.0) {
        return arg_err(format!("scale factor must be positive, got {s}"));
    }
    if s == 1.0 {
        return Ok(img.clone());
    }
    Ok(inverse_map(img, |xp, yp| (xp / s, yp / s)))
}

/// Draws the operation and source image for augmented output `index` of a
/// class. The draw depends only on `(seed, class_index, index)`.
pub fn draw_op(spec: &AugmentSpec, class_index: usize, index: usize, n_src: usize) -> (usize, AugmentOp) {
    let mut r = rng::stream(spec.seed, &[0xa06, class_index as u64, index as u64]);
    let src = r.gen_range(0..n_src);
    let mut ops = Vec::with_capacity(3);
    if spec.enable_flip {
        ops.push(0);
    }
    if !spec.rotation_angles.is_empty() {
        ops.push(1);
    }
    if !spec.scale_factors.is_empty() {
        ops.push(2);
    }
    let op = match ops[r.gen_range(0..ops.len())] {
        0 => AugmentOp::Flip,
        1 => AugmentOp::Rotate(spec.rotation_angles[r.gen_range(0..spec.rotation_angles.len())]),
        _ => AugmentOp::Scale(spec.scale_factors[r.gen_range(0..spec.scale_factors.len())]),
    };
    (src, op)
}

/// Returns exactly `target_per_class` images (or the originals when the class
/// already has that many): originals first, then seeded augmented variants.
pub fn augment_class(images: &[ImageRgb], spec: &AugmentSpec, class_index: usize) -> Result<Vec<ImageRgb>> {
    use rayon::prelude::*;

    if images.is_empty() {
        return arg_err("cannot augment an empty class");
    }
    spec.validate()?;
    if images.len() >= spec.target_per_class {
        return Ok(images.to_vec());
    }
    let extra: Result<Vec<ImageRgb>> = (images.len()..spec.target_per_class)
        .into_par_iter()
        .map(|i| {
            let (src, op) = draw_op(spec, class_index, i, images.len());
            op.apply(&images[src])
        })
        .collect();
    let mut out = images.to_vec();
    out.extend(extra?);
    Ok(out)
}
