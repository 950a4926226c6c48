//! Procedural rice-leaf images for desk-scale runs.
//!
//! Every image starts from a green value-noise leaf texture. Each disease
//! class paints a characteristic lesion motif through an alpha map; the final
//! pixel is `lerp(leaf, lesion, separability · alpha)`, so separability 0
//! makes every class the same distribution and 1 paints lesions at full
//! contrast. The ground-truth mask is `alpha > 0.5`.

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ingest, DatasetManifest};
use crate::error::{arg_err, Error, Result};
use crate::imgcore::ImageRgb;
use crate::rng::{self, StreamRng};
use crate::segment::BinaryMask;

/// Class directory names, in label order.
pub const CLASSES: [&str; 6] = [
    "bacterial_leaf_blight",
    "brown_spot",
    "healthy",
    "leaf_blast",
    "leaf_scald",
    "sheath_blight",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub per_class: usize,
    pub separability: f64,
    pub size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 100,
            separability: 1.0,
            size: 128,
        }
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Bilinearly smoothed lattice noise in `[0, 1]` with `cells` cells per side.
fn value_noise(size: usize, cells: usize, r: &mut StreamRng) -> Vec<f64> {
    let g = cells + 2;
    let lattice: Vec<f64> = (0..g * g).map(|_| r.gen::<f64>()).collect();
    let step = cells as f64 / size as f64;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 * step, y as f64 * step);
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (smoothstep(0.0, 1.0, fx - ix as f64), smoothstep(0.0, 1.0, fy - iy as f64));
            let at = |i: usize, j: usize| lattice[j * g + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Green leaf with parallel veins and two octaves of value noise.
fn leaf_base(size: usize, r: &mut StreamRng) -> Vec<[f64; 3]> {
    let jitter = r.gen_range(-12.0..12.0);
    let brightness = r.gen_range(0.8..1.2);
    let green = [60.0 + jitter * 0.5, 130.0 + jitter, 48.0 + jitter * 0.3];
    let coarse = value_noise(size, 4, r);
    let fine = value_noise(size, 16, r);
    let vein_freq = r.gen_range(6.0..10.0);
    let phase = r.gen_range(0.0..TAU);
    (0..size * size)
        .map(|k| {
            let v = (k / size) as f64 / size as f64;
            let n = 0.6 * coarse[k] + 0.4 * fine[k];
            let vein = 0.06 * (TAU * vein_freq * v + phase).sin();
            let f = brightness * (0.8 + 0.35 * n + vein);
            [green[0] * f, green[1] * f, green[2] * f]
        })
        .collect()
}

/// Per-pixel lesion alpha and color.
struct Lesion {
    alpha: Vec<f64>,
    color: Vec<[f64; 3]>,
}

impl Lesion {
    fn empty(size: usize) -> Self {
        Self {
            alpha: vec![0.0; size * size],
            color: vec![[0.0; 3]; size * size],
        }
    }

    /// Paints where `a` exceeds the current alpha.
    fn paint(&mut self, k: usize, a: f64, c: [f64; 3]) {
        if a > self.alpha[k] {
            self.alpha[k] = a;
            self.color[k] = c;
        }
    }
}

fn coords(size: usize) -> impl Iterator<Item = (usize, f64, f64)> {
    (0..size * size).map(move |k| (k, ((k % size) as f64 + 0.5) / size as f64, ((k / size) as f64 + 0.5) / size as f64))
}

/// Long yellow stripe entering from the leaf tip, with wavy margins.
fn blight_stripe(size: usize, r: &mut StreamRng, l: &mut Lesion) {
    let cy = r.gen_range(0.3..0.7);
    let w = r.gen_range(0.05..0.15);
    let len = r.gen_range(0.65..1.0);
    let (f, ph) = (r.gen_range(1.5..3.5), r.gen_range(0.0..TAU));
    for (k, u, v) in coords(size) {
        let half = w * (1.0 + 0.3 * (TAU * (u * f) + ph).sin());
        let a = (1.0 - smoothstep(half * 0.7, half, (v - cy).abs())) * (1.0 - smoothstep(len - 0.08, len, u));
        l.paint(k, a, [218.0, 200.0, 78.0]);
    }
}

/// Field of small dark-brown spots with darker centers.
fn brown_spots(size: usize, r: &mut StreamRng, l: &mut Lesion) {
    let n = r.gen_range(6..28);
    let spots: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| (r.gen_range(0.06..0.94), r.gen_range(0.06..0.94), r.gen_range(0.02..0.055)))
        .collect();
    for (k, u, v) in coords(size) {
        for &(cx, cy, rad) in &spots {
            let d = ((u - cx).powi(2) + ((v - cy) * 1.3).powi(2)).sqrt() / rad;
            let a = 1.0 - smoothstep(0.75, 1.0, d);
            l.paint(k, a, lerp3([88.0, 42.0, 20.0], [140.0, 82.0, 32.0], d.min(1.0)));
        }
    }
}

/// One or two large spindle-shaped blotches: gray-white centers, brown rims.
fn blast_blotches(size: usize, r: &mut StreamRng, l: &mut Lesion) {
    let n = r.gen_range(1..=2);
    for _ in 0..n {
        let (cx, cy) = (r.gen_range(0.3..0.7), r.gen_range(0.3..0.7));
        let (a_ax, b_ax) = (r.gen_range(0.14..0.32), r.gen_range(0.06..0.13));
        for (k, u, v) in coords(size) {
            // spindle: |x|/a + (y/b)^2 tapers to points along the leaf axis
            let d = ((u - cx) / a_ax).abs() + ((v - cy) / b_ax).powi(2);
            let a = 1.0 - smoothstep(0.85, 1.0, d);
            let c = if d < 0.55 { [182.0, 172.0, 148.0] } else { [135.0, 70.0, 34.0] };
            l.paint(k, a, c);
        }
    }
}

/// Scald creeping in from the tip: alternating tan and brown zonate bands.
fn scald_edge(size: usize, r: &mut StreamRng, l: &mut Lesion) {
    let reach = r.gen_range(0.25..0.6);
    let freq = r.gen_range(10.0..16.0);
    let (wf, wp) = (r.gen_range(1.0..2.5), r.gen_range(0.0..TAU));
    for (k, u, v) in coords(size) {
        let front = 1.0 - reach + 0.06 * (TAU * wf * v + wp).sin();
        let a = smoothstep(front - 0.04, front + 0.02, u);
        let band = 0.5 + 0.5 * (TAU * freq * (u - front)).sin();
        l.paint(k, a, lerp3([196.0, 154.0, 104.0], [150.0, 92.0, 52.0], band));
    }
}

/// Vertical sheath band, pale center and brown irregular margin.
fn sheath_band(size: usize, r: &mut StreamRng, l: &mut Lesion) {
    let cx = r.gen_range(0.3..0.7);
    let w = r.gen_range(0.07..0.18);
    let edge = value_noise(size, 6, r);
    for (k, u, _) in coords(size) {
        let half = w * (0.8 + 0.4 * edge[k]);
        let d = (u - cx).abs() / half;
        let a = 1.0 - smoothstep(0.85, 1.0, d);
        l.paint(k, a, lerp3([205.0, 198.0, 168.0], [142.0, 92.0, 50.0], smoothstep(0.5, 0.85, d)));
    }
}

/// Renders with the leaf optionally mirrored along each axis.
fn render(base: &[[f64; 3]], lesion: &Lesion, separability: f64, size: usize, flip: (bool, bool)) -> (ImageRgb, BinaryMask) {
    let src = |x: usize, y: usize| {
        let sx = if flip.0 { size - 1 - x } else { x };
        let sy = if flip.1 { size - 1 - y } else { y };
        sy * size + sx
    };
    let img = ImageRgb::from_fn(size, size, |x, y| {
        let k = src(x, y);
        let p = lerp3(base[k], lesion.color[k], separability * lesion.alpha[k]);
        p.map(|c| c.round().clamp(0.0, 255.0) as u8)
    });
    let bits = (0..size * size).map(|k| lesion.alpha[src(k % size, k / size)] > 0.5).collect();
    let mask = BinaryMask::new(size, size, bits).expect("square mask");
    (img, mask)
}

/// One synthetic sample of class `class` (index into [`CLASSES`]).
pub fn synth_image(class: usize, separability: f64, size: usize, seed: u64) -> Result<(ImageRgb, BinaryMask)> {
    if class >= CLASSES.len() {
        return arg_err(format!("class index {class} outside 0..{}", CLASSES.len()));
    }
    if !(0.0..=1.0).contains(&separability) {
        return arg_err(format!("separability {separability} outside [0, 1]"));
    }
    if size < 8 {
        return arg_err("synthetic images need size >= 8");
    }
    let mut r = rng::stream(seed, &[0x5e]);
    let base = leaf_base(size, &mut r);
    let flip = (r.gen::<bool>(), r.gen::<bool>());
    let mut lesion = Lesion::empty(size);
    match class {
        0 => blight_stripe(size, &mut r, &mut lesion),
        1 => brown_spots(size, &mut r, &mut lesion),
        2 => {}
        3 => blast_blotches(size, &mut r, &mut lesion),
        4 => scald_edge(size, &mut r, &mut lesion),
        _ => sheath_band(size, &mut r, &mut lesion),
    }
    let tint = [r.gen_range(0.85..1.15), r.gen_range(0.85..1.15), r.gen_range(0.85..1.15)];
    for c in &mut lesion.color {
        *c = [c[0] * tint[0], c[1] * tint[1], c[2] * tint[2]];
    }
    Ok(render(&base, &lesion, separability, size, flip))
}

/// A leaf with a single brown blotch at full contrast, for segmentation checks.
pub fn single_lesion_leaf(size: usize, seed: u64) -> (ImageRgb, BinaryMask) {
    let mut r = rng::stream(seed, &[0x51]);
    let base = leaf_base(size, &mut r);
    let mut lesion = Lesion::empty(size);
    let (cx, cy) = (r.gen_range(0.35..0.65), r.gen_range(0.35..0.65));
    let (ax, ay) = (r.gen_range(0.15..0.25), r.gen_range(0.12..0.2));
    for (k, u, v) in coords(size) {
        let d = (((u - cx) / ax).powi(2) + ((v - cy) / ay).powi(2)).sqrt();
        lesion.paint(k, 1.0 - smoothstep(0.9, 1.0, d), [140.0, 74.0, 36.0]);
    }
    render(&base, &lesion, 1.0, size, (false, false))
}

/// Writes `per_class` images per class to `<out>/images/<class>/` and their
/// ground-truth masks to `<out>/masks/<class>/`, then ingests the images.
pub fn synth_generate(cfg: &SynthConfig, seed: u64, out: &Path) -> Result<DatasetManifest> {
    if cfg.per_class < 10 {
        return arg_err(format!("per_class must be at least 10, got {}", cfg.per_class));
    }
    for class in CLASSES {
        for sub in ["images", "masks"] {
            let dir = out.join(sub).join(class);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }
    let jobs: Vec<(usize, usize)> = (0..CLASSES.len()).flat_map(|c| (0..cfg.per_class).map(move |i| (c, i))).collect();
    jobs.par_iter().try_for_each(|&(c, i)| {
        let (img, mask) = synth_image(c, cfg.separability, cfg.size, rng::derive_seed(seed, &[c as u64, i as u64]))?;
        let name = format!("{}_{i:04}.png", CLASSES[c]);
        img.save_png(&out.join("images").join(CLASSES[c]).join(&name))?;
        let m = ImageRgb::from_fn(cfg.size, cfg.size, |x, y| if mask.get(x, y) { [255; 3] } else { [0; 3] });
        m.save_png(&out.join("masks").join(CLASSES[c]).join(&name))
    })?;
    ingest(&out.join("images"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_class_specific() {
        let (a, ma) = synth_image(3, 1.0, 32, 11).unwrap();
        let (b, mb) = synth_image(3, 1.0, 32, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert!(ma.count() > 0);
        let (_, healthy) = synth_image(2, 1.0, 32, 11).unwrap();
        assert_eq!(healthy.count(), 0);
    }

    #[test]
    fn zero_separability_hides_lesions() {
        for c in 0..6 {
            let (img, _) = synth_image(c, 0.0, 24, 5).unwrap();
            let (healthy, _) = synth_image(2, 0.0, 24, 5).unwrap();
            assert_eq!(img, healthy, "class {c}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_image(6, 1.0, 32, 0).is_err());
        assert!(synth_image(0, 1.5, 32, 0).is_err());
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            per_class: 5,
            ..Default::default()
        };
        assert!(synth_generate(&cfg, 0, dir.path()).is_err());
    }
}
