//! Two-level orthonormal 2-D Haar decomposition.
//!
//! For each 2x2 block `[[a, b], [c, d]]`:
//! `LL = (a+b+c+d)/2`, `LH = ((a+b)-(c+d))/2`, `HL = ((a-b)+(c-d))/2`,
//! `HH = ((a-b)-(c-d))/2`.

use super::stats::{stat14, StatDescriptor14};
use crate::error::{arg_err, Result};
use crate::segment::SegmentedImage;

pub const BAND_NAMES: [&str; 8] = ["LL1", "LH1", "HL1", "HH1", "LL2", "LH2", "HL2", "HH2"];

/// One sub-band, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// `[LL, LH, HL, HH]` of one decomposition level.
pub fn haar_level(data: &[f64], width: usize, height: usize) -> Result<[Band; 4]> {
    if width % 2 != 0 || height % 2 != 0 || width == 0 || height == 0 {
        return arg_err(format!("haar level needs even dimensions, got {width}x{height}"));
    }
    let (w2, h2) = (width / 2, height / 2);
    let mut bands: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(w2 * h2));
    for y in 0..h2 {
        for x in 0..w2 {
            let a = data[2 * y * width + 2 * x];
            let b = data[2 * y * width + 2 * x + 1];
            let c = data[(2 * y + 1) * width + 2 * x];
            let d = data[(2 * y + 1) * width + 2 * x + 1];
            bands[0].push((a + b + c + d) / 2.0);
            bands[1].push(((a + b) - (c + d)) / 2.0);
            bands[2].push(((a - b) + (c - d)) / 2.0);
            bands[3].push(((a - b) - (c - d)) / 2.0);
        }
    }
    Ok(bands.map(|data| Band {
        width: w2,
        height: h2,
        data,
    }))
}

/// Inverse of [`haar_level`].
pub fn haar_level_inverse(bands: &[Band; 4]) -> Vec<f64> {
    let (w2, h2) = (bands[0].width, bands[0].height);
    let width = 2 * w2;
    let mut out = vec![0.0; width * 2 * h2];
    for i in 0..w2 * h2 {
        let (y, x) = (i / w2, i % w2);
        let (ll, lh, hl, hh) = (bands[0].data[i], bands[1].data[i], bands[2].data[i], bands[3].data[i]);
        out[2 * y * width + 2 * x] = (ll + lh + hl + hh) / 2.0;
        out[2 * y * width + 2 * x + 1] = (ll + lh - hl - hh) / 2.0;
        out[(2 * y + 1) * width + 2 * x] = (ll - lh + hl - hh) / 2.0;
        out[(2 * y + 1) * width + 2 * x + 1] = (ll - lh - hl + hh) / 2.0;
    }
    out
}

/// The eight canonical bands `LL1, LH1, HL1, HH1, LL2, LH2, HL2, HH2`.
pub fn haar_two_level(data: &[f64], width: usize, height: usize) -> Result<Vec<Band>> {
    if width % 4 != 0 || height % 4 != 0 {
        return arg_err(format!(
            "two-level DWT needs dimensions divisible by 4, got {width}x{height}"
        ));
    }
    let level1 = haar_level(data, width, height)?;
    let level2 = haar_level(&level1[0].data, level1[0].width, level1[0].height)?;
    Ok(level1.into_iter().chain(level2).collect())
}

/// stat14 per band over the zero-filled masked image, 8 x 14 values.
pub fn dwt_features(img: &SegmentedImage) -> Result<Vec<StatDescriptor14>> {
    haar_two_level(&img.masked_gray(), img.width(), img.height())?
        .iter()
        .map(|b| stat14(&b.data, None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    #[test]
    fn constant_image() {
        let bands = haar_two_level(&[0.25; 64], 8, 8).unwrap();
        assert!(bands[0].data.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(bands[4].data.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        for k in [1, 2, 3, 5, 6, 7] {
            assert!(bands[k].data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_block_by_hand() {
        let (a, b, c, d) = (1.0, 2.0, 5.0, 11.0);
        let [ll, lh, hl, hh] = haar_level(&[a, b, c, d], 2, 2).unwrap();
        assert_eq!(ll.data, vec![(a + b + c + d) / 2.0]);
        assert_eq!(lh.data, vec![((a + b) - (c + d)) / 2.0]);
        assert_eq!(hl.data, vec![((a - b) + (c - d)) / 2.0]);
        assert_eq!(hh.data, vec![((a - b) - (c - d)) / 2.0]);
    }

    #[test]
    fn energy_and_reconstruction() {
        let data: Vec<f64> = (0..16 * 12).map(|i| ((i * 53) % 97) as f64 / 96.0).collect();
        let l1 = haar_level(&data, 16, 12).unwrap();
        let e1: f64 = l1.iter().map(|b| energy(&b.data)).sum();
        assert!((e1 - energy(&data)).abs() <= 1e-9 * energy(&data));
        let back = haar_level_inverse(&l1);
        assert!(back.iter().zip(&data).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(haar_two_level(&data, 16, 12).is_ok());
        assert!(haar_two_level(&data[..16 * 6], 16, 6).is_err());
    }
}
