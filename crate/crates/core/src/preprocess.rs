//! Min-max intensity normalization and adaptive histogram equalization.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::imgcore::ImageGray;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub bins: usize,
    /// Histogram ceiling as a multiple of the mean bin count; 0 disables clipping.
    pub clip_limit: f64,
}

impl Default for AheParams {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            bins: 256,
            clip_limit: 0.0,
        }
    }
}

impl AheParams {
    pub fn validate(&self) -> Result<()> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return arg_err("AHE tile counts must be at least 1");
        }
        if self.bins < 2 {
            return arg_err("AHE needs at least 2 bins");
        }
        if !(self.clip_limit >= 0.0) {
            return arg_err("AHE clip limit must be non-negative");
        }
        Ok(())
    }
}

/// `(I - I_min) / (I_max - I_min)`; a constant image maps to all zeros.
pub fn minmax_normalize(img: &ImageGray) -> ImageGray {
    let (lo, hi) = img
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let data = if span > 0.0 {
        img.data().iter().map(|&v| (v - lo) / span).collect()
    } else {
        vec![0.0; img.data().len()]
    };
    ImageGray::new(img.width(), img.height(), data).expect("same shape")
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Per-tile lookup from bin index to output intensity, or `None` for a tile
/// whose pixels all share one bin (such tiles map values to themselves).
fn tile_mapping(hist: &mut [f64], clip_limit: f64) -> Option<Vec<f64>> {
    let total: f64 = hist.iter().sum();
    if hist.iter().filter(|&&c| c > 0.0).count() <= 1 {
        return None;
    }
    if clip_limit > 0.0 {
        let ceiling = (clip_limit * total / hist.len() as f64).max(1.0);
        let excess: f64 = hist.iter().map(|&c| (c - ceiling).max(0.0)).sum();
        let share = excess / hist.len() as f64;
        for c in hist.iter_mut() {
            *c = c.min(ceiling) + share;
        }
    }
    // mid-rank CDF keeps the mapping inside (0, 1) and flat for uniform input
    let mut below = 0.0;
    Some(
        hist.iter()
            .map(|&c| {
                let m = (below + 0.5 * c) / total;
                below += c;
                m
            })
            .collect(),
    )
}

/// Tile-wise histogram equalization with bilinear blending between the
/// mappings of the four nearest tile centers. Input must lie in `[0, 1]`.
pub fn adaptive_hist_eq(img: &ImageGray, p: &AheParams) -> Result<ImageGray> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < p.tiles_x || h < p.tiles_y {
        return arg_err(format!(
            "image {w}x{h} smaller than one pixel per tile ({}x{} tiles)",
            p.tiles_x, p.tiles_y
        ));
    }
    let x_edge = |t: usize| t * w / p.tiles_x;
    let y_edge = |t: usize| t * h / p.tiles_y;

    let mut maps: Vec<Option<Vec<f64>>> = Vec::with_capacity(p.tiles_x * p.tiles_y);
    for ty in 0..p.tiles_y {
        for tx in 0..p.tiles_x {
            let mut hist = vec![0.0; p.bins];
            for y in y_edge(ty)..y_edge(ty + 1) {
                for x in x_edge(tx)..x_edge(tx + 1) {
                    hist[bin_of(img.get(x, y), p.bins)] += 1.0;
                }
            }
            maps.push(tile_mapping(&mut hist, p.clip_limit));
        }
    }

    let centers = |n: usize, edge: &dyn Fn(usize) -> usize| -> Vec<f64> {
        (0..n).map(|t| (edge(t) + edge(t + 1)) as f64 / 2.0 - 0.5).collect()
    };
    let cx = centers(p.tiles_x, &x_edge);
    let cy = centers(p.tiles_y, &y_edge);
    // index of the tile center at or left of `pos`, and the blend weight toward the next
    let locate = |c: &[f64], pos: f64| -> (usize, usize, f64) {
        if pos <= c[0] {
            return (0, 0, 0.0);
        }
        let last = c.len() - 1;
        if pos >= c[last] {
            return (last, last, 0.0);
        }
        let i = c.iter().rposition(|&v| v <= pos).unwrap_or(0);
        (i, i + 1, (pos - c[i]) / (c[i + 1] - c[i]))
    };

    let out = ImageGray::from_fn(w, h, |x, y| {
        let v = img.get(x, y);
        let b = bin_of(v, p.bins);
        let (x0, x1, fx) = locate(&cx, x as f64);
        let (y0, y1, fy) = locate(&cy, y as f64);
        let m = |tx: usize, ty: usize| match &maps[ty * p.tiles_x + tx] {
            Some(map) => map[b],
            None => v.clamp(0.0, 1.0),
        };
        let top = m(x0, y0) * (1.0 - fx) + m(x1, y0) * fx;
        let bottom = m(x0, y1) * (1.0 - fx) + m(x1, y1) * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let img = ImageGray::from_fn(256, 1, |x, _| x as f64);
        let n = minmax_normalize(&img);
        assert_eq!(n.data()[0], 0.0);
        assert_eq!(n.data()[255], 1.0);
        assert!((n.data()[128] - 0.501_961).abs() < 1e-6);
        let c = ImageGray::from_fn(4, 4, |_, _| 7.0);
        assert!(minmax_normalize(&c).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ahe_constant_image_unchanged() {
        let c = ImageGray::from_fn(32, 32, |_, _| 0.37);
        let out = adaptive_hist_eq(&c, &AheParams::default()).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn ahe_ramp_single_tile_is_flat() {
        let img = ImageGray::from_fn(256, 16, |x, _| x as f64 / 255.0);
        let p = AheParams {
            tiles_x: 1,
            tiles_y: 1,
            ..AheParams::default()
        };
        let out = adaptive_hist_eq(&img, &p).unwrap();
        // global equalization oracle: mid-rank of each value among all pixels
        let mut sorted: Vec<f64> = img.data().to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        for (v, o) in img.data().iter().zip(out.data()) {
            let lo = sorted.partition_point(|s| s < v) as f64;
            let hi = sorted.partition_point(|s| s <= v) as f64;
            assert!((o - (lo + hi) / 2.0 / n).abs() < 1e-12);
        }
        let mut hist = [0usize; 256];
        for &v in out.data() {
            hist[bin_of(v, 256)] += 1;
        }
        let expect = out.data().len() as f64 / 256.0;
        for c in hist {
            assert!((c as f64 - expect).abs() <= 0.02 * expect);
        }
    }

    #[test]
    fn ahe_rejects_tiny_image() {
        let img = ImageGray::from_fn(4, 4, |x, _| x as f64 / 4.0);
        assert!(adaptive_hist_eq(&img, &AheParams::default()).is_err());
    }

    #[test]
    fn ahe_clipping_stays_in_range() {
        let img = ImageGray::from_fn(40, 40, |x, y| ((x * y) % 17) as f64 / 16.0);
        let p = AheParams {
            clip_limit: 2.0,
            ..AheParams::default()
        };
        let out = adaptive_hist_eq(&img, &p).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn normalize_preserves_order_and_is_idempotent(vals in proptest::collection::vec(0.0f64..255.0, 2..64)) {
            let img = ImageGray::new(vals.len(), 1, vals.clone()).unwrap();
            let n = minmax_normalize(&img);
            for i in 0..vals.len() {
                for j in 0..vals.len() {
                    if vals[i] <= vals[j] {
                        prop_assert!(n.data()[i] <= n.data()[j]);
                    }
                }
            }
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                prop_assert_eq!(minmax_normalize(&n), n);
            }
        }

        #[test]
        fn ahe_output_in_unit_range_and_monotone_per_tile(seed: u64) {
            let img = ImageGray::from_fn(24, 24, |x, y| {
                (crate::rng::splitmix64(seed ^ ((x * 24 + y) as u64)) % 1000) as f64 / 999.0
            });
            let p = AheParams { tiles_x: 1, tiles_y: 1, bins: 64, clip_limit: 0.0 };
            let out = adaptive_hist_eq(&img, &p).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
            for i in 0..img.data().len() {
                for j in 0..img.data().len() {
                    if img.data()[i] <= img.data()[j] {
                        prop_assert!(out.data()[i] <= out.data()[j]);
                    }
                }
            }
        }
    }
}
