//! Lesion segmentation by global Otsu thresholding of the CIELAB a* plane.

use crate::error::{arg_err, Result};
use crate::imgcore::{rgb_to_lab, to_gray, ImageGray, ImageRgb};
use crate::preprocess::{adaptive_hist_eq, minmax_normalize, AheParams};

pub const OTSU_BINS: usize = 256;
/// Masks covering less than this fraction (or more than its complement) of
/// the image are replaced by the full-leaf mask.
pub const FALLBACK_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return arg_err(format!("mask has {} bits, expected {}x{}", bits.len(), width, height));
        }
        Ok(Self { width, height, bits })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += usize::from(a && b);
            union += usize::from(a || b);
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Preprocessed grayscale plus lesion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    pub gray: ImageGray,
    pub mask: BinaryMask,
    pub threshold: f64,
    /// Set when the thresholded mask was near-empty or near-full and the whole
    /// leaf was used instead.
    pub fallback: bool,
}

impl SegmentedImage {
    /// Full-mask wrapper, used where an already-normalized image is analysed as a whole.
    pub fn full(gray: ImageGray) -> Self {
        let mask = BinaryMask::full(gray.width(), gray.height());
        Self {
            gray,
            mask,
            threshold: f64::NAN,
            fallback: false,
        }
    }

    pub fn width(&self) -> usize {
        self.gray.width()
    }

    pub fn height(&self) -> usize {
        self.gray.height()
    }

    /// Gray values inside the mask, zero outside.
    pub fn masked_gray(&self) -> Vec<f64> {
        self.gray
            .data()
            .iter()
            .zip(self.mask.bits())
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    }
}

/// Bin of `v` in a `bins`-bin histogram spanning `[lo, hi]`.
pub fn histogram_bin(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Otsu's threshold over a 256-bin histogram of the plane's range. Candidate
/// thresholds are the 255 interior bin boundaries; the smallest boundary that
/// maximizes between-class variance wins. A constant plane returns its value.
pub fn otsu_threshold(plane: &[f64]) -> f64 {
    assert!(!plane.is_empty(), "otsu_threshold on empty plane");
    let (lo, hi) = plane
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi <= lo {
        return lo;
    }
    let mut hist = [0.0f64; OTSU_BINS];
    for &v in plane {
        hist[histogram_bin(v, lo, hi, OTSU_BINS)] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let total_sum: f64 = hist.iter().enumerate().map(|(b, &c)| b as f64 * c).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 1usize);
    for t in 1..OTSU_BINS {
        w0 += hist[t - 1];
        s0 += (t - 1) as f64 * hist[t - 1];
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = s0 / w0;
        let mu1 = (total_sum - s0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, t);
        }
    }
    lo + best.1 as f64 * (hi - lo) / OTSU_BINS as f64
}

/// Lab conversion, Otsu on a*, mask `a* > T`, and the normalized + equalized
/// grayscale that downstream features read.
pub fn segment_leaf(rgb: &ImageRgb, ahe: &AheParams) -> Result<SegmentedImage> {
    let lab = rgb_to_lab(rgb);
    let threshold = otsu_threshold(&lab.a_star);
    let bits: Vec<bool> = lab.a_star.iter().map(|&a| a > threshold).collect();
    let mut mask = BinaryMask::new(rgb.width(), rgb.height(), bits)?;
    let frac = mask.count() as f64 / (rgb.width() * rgb.height()) as f64;
    let fallback = !(FALLBACK_FRACTION..=1.0 - FALLBACK_FRACTION).contains(&frac);
    if fallback {
        mask = BinaryMask::full(rgb.width(), rgb.height());
    }
    let gray = adaptive_hist_eq(&minmax_normalize(&to_gray(rgb)), ahe)?;
    Ok(SegmentedImage {
        gray,
        mask,
        threshold,
        fallback,
    })
}

/// Debug overlay: mask pixels blended 50% toward pure red.
pub fn overlay(rgb: &ImageRgb, mask: &BinaryMask) -> ImageRgb {
    ImageRgb::from_fn(rgb.width(), rgb.height(), |x, y| {
        let p = rgb.pixel(x, y);
        if mask.get(x, y) {
            [
                ((u16::from(p[0]) + 255 + 1) / 2) as u8,
                (p[1] / 2),
                (p[2] / 2),
            ]
        } else {
            p
        }
    })
}
