use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::stats::{stat14, StatDescriptor14};
use crate::error::Result;
use crate::segment::SegmentedImage;

/// Unnormalized 2-D DFT `F(u,v) = Σ f(x,y) e^{-2πi(ux/W + vy/H)}`, row-major
/// `H x W` output indexed `[v * W + u]`.
pub fn dft2(data: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(width);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(height);
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = buf[y * width + x];
        }
        col_fft.process(&mut col);
        for y in 0..height {
            buf[y * width + x] = col[y];
        }
    }
    buf
}

pub fn magnitude_spectrum(img: &SegmentedImage) -> Vec<f64> {
    dft2(&img.masked_gray(), img.width(), img.height())
        .iter()
        .map(|c| c.norm())
        .collect()
}

/// stat14 of the magnitude spectrum (DC included) of the zero-filled masked image.
pub fn fft_features(img: &SegmentedImage) -> Result<StatDescriptor14> {
    stat14(&magnitude_spectrum(img), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ImageGray;

    #[test]
    fn constant_image_dc_only() {
        let (n, c) = (8usize, 0.3);
        let img = SegmentedImage::full(ImageGray::new(n, n, vec![c; n * n]).unwrap());
        let mags = magnitude_spectrum(&img);
        assert!((mags[0] - (n * n) as f64 * c).abs() < 1e-12);
        assert!(mags[1..].iter().all(|&m| m < 1e-12));
        let s = fft_features(&img).unwrap();
        assert!((s.maximum - (n * n) as f64 * c).abs() < 1e-12);
    }

    #[test]
    fn parseval() {
        let (w, h) = (12usize, 8usize);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let spec = dft2(&data, w, h);
        let lhs: f64 = data.iter().map(|v| v * v).sum();
        let rhs: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / (w * h) as f64;
        assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    #[test]
    fn cosine_two_peaks() {
        let (n, k) = (8usize, 2usize);
        let data: Vec<f64> = (0..n * n)
            .map(|i| (2.0 * std::f64::consts::PI * k as f64 * (i % n) as f64 / n as f64).cos())
            .collect();
        let spec = dft2(&data, n, n);
        let peaks: Vec<usize> = (0..n * n).filter(|&i| spec[i].norm() > 1e-9).collect();
        assert_eq!(peaks, vec![k, n - k]);
    }
}
