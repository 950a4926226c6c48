//! Gray-level co-occurrence and difference statistics over masked pixel pairs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stats::{stat14_weighted, StatDescriptor14};
use crate::error::{Error, Result};
use crate::segment::SegmentedImage;

pub const HARALICK_NAMES: [&str; 14] = [
    "asm",
    "contrast",
    "correlation",
    "sum_squares_variance",
    "idm",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
    "max_correlation_coefficient",
];

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [Self::Deg0, Self::Deg45, Self::Deg90, Self::Deg135];

    /// Pixel displacement `(dx, dy)` with image rows growing downward.
    pub fn offset(self, distance: usize) -> (isize, isize) {
        let d = distance as isize;
        match self {
            Self::Deg0 => (d, 0),
            Self::Deg45 => (d, -d),
            Self::Deg90 => (0, -d),
            Self::Deg135 => (-d, -d),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Deg0 => "a000",
            Self::Deg45 => "a045",
            Self::Deg90 => "a090",
            Self::Deg135 => "a135",
        }
    }
}

/// Gray level of an intensity in `[0, 1]` quantized to `levels` bins.
pub fn quantize(v: f64, levels: usize) -> usize {
    ((v * levels as f64).floor().max(0.0) as usize).min(levels - 1)
}

/// Calls `f(level_a, level_b)` for every in-bounds pair `(p, p + offset)`
/// whose endpoints are both inside the mask.
fn for_each_pair(img: &SegmentedImage, levels: usize, offset: (isize, isize), mut f: impl FnMut(usize, usize)) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let q: Vec<usize> = img.gray.data().iter().map(|&v| quantize(v, levels)).collect();
    let mask = img.mask.bits();
    for y in 0..h {
        let y2 = y + offset.1;
        if y2 < 0 || y2 >= h {
            continue;
        }
        for x in 0..w {
            let x2 = x + offset.0;
            if x2 < 0 || x2 >= w {
                continue;
            }
            let (i, j) = ((y * w + x) as usize, (y2 * w + x2) as usize);
            if mask[i] && mask[j] {
                f(q[i], q[j]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    pub offset: (isize, isize),
    /// Row-major `levels x levels` joint probabilities.
    pub matrix: Vec<f64>,
}

impl Glcm {
    pub fn uniform(levels: usize, offset: (isize, isize)) -> Self {
        let n = levels * levels;
        Self {
            levels,
            offset,
            matrix: vec![1.0 / n as f64; n],
        }
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.levels + j]
    }
}

/// Symmetric, normalized co-occurrence matrix.
pub fn glcm_compute(img: &SegmentedImage, orientation: Orientation, distance: usize, levels: usize) -> Result<Glcm> {
    let offset = orientation.offset(distance);
    let mut counts = vec![0.0; levels * levels];
    let mut total = 0.0;
    for_each_pair(img, levels, offset, |a, b| {
        counts[a * levels + b] += 1.0;
        counts[b * levels + a] += 1.0;
        total += 2.0;
    });
    if total == 0.0 {
        return Err(Error::DegenerateMatrix(format!(
            "no masked pixel pair at offset {offset:?}"
        )));
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(Glcm {
        levels,
        offset,
        matrix: counts,
    })
}

fn entropy_bits(ps: impl Iterator<Item = f64>) -> f64 {
    ps.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// The 14 Haralick features, in [`HARALICK_NAMES`] order. Entropies are in bits.
pub fn glcm_features14(g: &Glcm) -> [f64; 14] {
    let m = g.levels;
    let mut px = vec![0.0; m];
    let mut py = vec![0.0; m];
    let mut p_sum = vec![0.0; 2 * m - 1];
    let mut p_diff = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let p = g.p(i, j);
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            p_diff[i.abs_diff(j)] += p;
        }
    }
    let mu_x: f64 = px.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let var_x: f64 = px.iter().enumerate().map(|(i, p)| (i as f64 - mu_x).powi(2) * p).sum();
    let var_y: f64 = py.iter().enumerate().map(|(j, p)| (j as f64 - mu_y).powi(2) * p).sum();

    let (mut asm, mut contrast, mut cross, mut idm, mut hxy1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let p = g.p(i, j);
            if p == 0.0 {
                continue;
            }
            let d = i as f64 - j as f64;
            asm += p * p;
            contrast += d * d * p;
            cross += i as f64 * j as f64 * p;
            idm += p / (1.0 + d * d);
            hxy1 -= p * (px[i] * py[j]).log2();
        }
    }
    let sd = (var_x * var_y).sqrt();
    let correlation = if sd > EPS { (cross - mu_x * mu_y) / sd } else { 0.0 };

    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let sum_variance: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - sum_average).powi(2) * p)
        .sum();
    let sum_entropy = entropy_bits(p_sum.iter().copied());
    let entropy = entropy_bits(g.matrix.iter().copied());
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let diff_variance: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - diff_mean).powi(2) * p)
        .sum();
    let diff_entropy = entropy_bits(p_diff.iter().copied());

    let hx = entropy_bits(px.iter().copied());
    let hy = entropy_bits(py.iter().copied());
    let mut hxy2 = 0.0;
    for &a in px.iter().filter(|&&a| a > 0.0) {
        for &b in py.iter().filter(|&&b| b > 0.0) {
            hxy2 -= a * b * (a * b).log2();
        }
    }
    let hmax = hx.max(hy);
    let imc1 = if hmax > EPS { (entropy - hxy1) / hmax } else { 0.0 };
    // entropies in bits: exp(-2 H_nats) = 2^(-2 H_bits)
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp2()).max(0.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        var_x,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        diff_variance,
        diff_entropy,
        imc1,
        imc2,
        max_correlation_coefficient(g, &px, &py),
    ]
}

/// Square root of the second-largest eigenvalue of
/// `Q(i,j) = Σ_k p(i,k) p(j,k) / (px(i) py(k))`, computed through the
/// similar symmetric matrix `B Bᵀ` with `B(i,k) = p(i,k) / sqrt(px(i) py(k))`.
fn max_correlation_coefficient(g: &Glcm, px: &[f64], py: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..g.levels).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..g.levels).filter(|&k| py[k] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return 0.0;
    }
    let b = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (i, k) = (rows[r], cols[c]);
        g.p(i, k) / (px[i] * py[k]).sqrt()
    });
    let c = &b * b.transpose();
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1].max(0.0).sqrt().min(1.0)
}

/// Distribution of absolute gray-level differences over masked pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gldm {
    pub levels: usize,
    pub offset: (isize, isize),
    pub distribution: Vec<f64>,
}

impl Gldm {
    pub fn uniform(levels: usize, offset: (isize, isize)) -> Self {
        Self {
            levels,
            offset,
            distribution: vec![1.0 / levels as f64; levels],
        }
    }
}

pub fn gldm_compute(img: &SegmentedImage, orientation: Orientation, distance: usize, levels: usize) -> Result<Gldm> {
    let offset = orientation.offset(distance);
    let mut counts = vec![0.0; levels];
    let mut total = 0.0;
    for_each_pair(img, levels, offset, |a, b| {
        counts[a.abs_diff(b)] += 1.0;
        total += 1.0;
    });
    if total == 0.0 {
        return Err(Error::DegenerateMatrix(format!(
            "no masked pixel pair at offset {offset:?}"
        )));
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(Gldm {
        levels,
        offset,
        distribution: counts,
    })
}

/// stat14 of the difference level weighted by its probability; area is the
/// number of difference levels with nonzero probability.
pub fn gldm_features14(d: &Gldm) -> StatDescriptor14 {
    let values: Vec<f64> = (0..d.levels).map(|k| k as f64).collect();
    let area = d.distribution.iter().filter(|&&p| p > 0.0).count();
    stat14_weighted(&values, &d.distribution, area as f64).expect("normalized distribution has support")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ImageGray;

    fn seg(w: usize, h: usize, v: &[f64]) -> SegmentedImage {
        SegmentedImage::full(ImageGray::new(w, h, v.to_vec()).unwrap())
    }

    #[test]
    fn two_by_two_horizontal() {
        let img = seg(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let g = glcm_compute(&img, Orientation::Deg0, 1, 2).unwrap();
        assert_eq!(g.matrix, vec![0.5, 0.0, 0.0, 0.5]);
        let f = glcm_features14(&g);
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn constant_image_single_entry() {
        let img = seg(5, 4, &[0.4; 20]);
        for o in Orientation::ALL {
            let g = glcm_compute(&img, o, 1, 32).unwrap();
            let k = quantize(0.4, 32);
            assert_eq!(g.p(k, k), 1.0);
            assert_eq!(g.matrix.iter().filter(|&&p| p > 0.0).count(), 1);
        }
    }

    #[test]
    fn uniform_glcm_closed_form() {
        for m in [2usize, 4, 8, 32] {
            let f = glcm_features14(&Glcm::uniform(m, (1, 0)));
            assert!((f[0] - 1.0 / (m * m) as f64).abs() < 1e-15);
            assert!((f[8] - 2.0 * (m as f64).log2()).abs() < 1e-12);
            // independent marginals: no correlation, no information correlation
            assert!(f[2].abs() < 1e-12);
            assert!(f[11].abs() < 1e-12 && f[12].abs() < 1e-6);
        }
    }

    #[test]
    fn diagonal_glcm_zero_contrast() {
        let mut g = Glcm::uniform(4, (1, 0));
        g.matrix = vec![0.0; 16];
        for i in 0..4 {
            g.matrix[i * 4 + i] = 0.25;
        }
        let f = glcm_features14(&g);
        assert_eq!(f[1], 0.0);
        assert!((f[2] - 1.0).abs() < 1e-12);
        assert!((f[13] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_pairs_is_degenerate() {
        let gray = ImageGray::new(3, 3, vec![0.5; 9]).unwrap();
        let mut bits = vec![false; 9];
        bits[4] = true;
        let img = SegmentedImage {
            gray,
            mask: crate::segment::BinaryMask::new(3, 3, bits).unwrap(),
            threshold: 0.0,
            fallback: false,
        };
        assert!(matches!(glcm_compute(&img, Orientation::Deg0, 1, 8), Err(Error::DegenerateMatrix(_))));
        assert!(matches!(gldm_compute(&img, Orientation::Deg0, 1, 8), Err(Error::DegenerateMatrix(_))));
    }

    #[test]
    fn gldm_cases() {
        let img = seg(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let d = gldm_compute(&img, Orientation::Deg0, 1, 2).unwrap();
        assert_eq!(d.distribution, vec![1.0, 0.0]);
        let f = gldm_features14(&d);
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.mean, 0.0);

        let stripes = seg(6, 3, &(0..18).map(|i| (i % 2) as f64).collect::<Vec<_>>());
        let d = gldm_compute(&stripes, Orientation::Deg0, 1, 2).unwrap();
        assert_eq!(d.distribution, vec![0.0, 1.0]);
        assert_eq!(gldm_features14(&d).mean, 1.0);
    }

    #[test]
    fn gldm_flip_invariant_at_zero_degrees() {
        let v: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let flipped: Vec<f64> = (0..30).map(|i| v[(i / 6) * 6 + 5 - i % 6]).collect();
        let a = gldm_compute(&seg(6, 5, &v), Orientation::Deg0, 1, 8).unwrap();
        let b = gldm_compute(&seg(6, 5, &flipped), Orientation::Deg0, 1, 8).unwrap();
        assert_eq!(a.distribution, b.distribution);
    }
}
