use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

pub const STAT_NAMES: [&str; 14] = [
    "area", "mean", "std", "energy", "median", "skewness", "entropy", "max", "min", "mad",
    "kurtosis", "range", "rms", "uniformity",
];

/// Magnitudes at or below this count as zero for the default area statistic.
pub const AREA_EPS: f64 = 1e-12;
pub const HIST_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatDescriptor14 {
    pub area: f64,
    pub mean: f64,
    pub standard_deviation: f64,
    pub energy: f64,
    pub median: f64,
    pub skewness: f64,
    /// Shannon entropy (bits) of the 256-bin histogram over the value range.
    pub entropy: f64,
    pub maximum: f64,
    pub minimum: f64,
    pub mean_absolute_deviation: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub range: f64,
    pub root_mean_square: f64,
    pub uniformity: f64,
}

impl StatDescriptor14 {
    pub fn to_array(&self) -> [f64; 14] {
        [
            self.area,
            self.mean,
            self.standard_deviation,
            self.energy,
            self.median,
            self.skewness,
            self.entropy,
            self.maximum,
            self.minimum,
            self.mean_absolute_deviation,
            self.kurtosis,
            self.range,
            self.root_mean_square,
            self.uniformity,
        ]
    }
}

/// The 14 descriptors of an unweighted sample. `area` defaults to the number
/// of entries with `|v| > 1e-12`.
pub fn stat14(values: &[f64], area_override: Option<usize>) -> Result<StatDescriptor14> {
    if values.is_empty() {
        return arg_err("stat14 of an empty array");
    }
    let area = area_override.unwrap_or_else(|| values.iter().filter(|v| v.abs() > AREA_EPS).count());
    let ones = vec![1.0; values.len()];
    stat14_weighted(values, &ones, area as f64)
}

/// The 14 descriptors of a discrete distribution with non-negative weights.
/// With unit weights this is the plain sample version (energy is `Σ v²`, the
/// moments are population moments).
pub fn stat14_weighted(values: &[f64], weights: &[f64], area: f64) -> Result<StatDescriptor14> {
    if values.len() != weights.len() {
        return arg_err("stat14: values and weights differ in length");
    }
    let mut pts: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    if pts.is_empty() {
        return arg_err("stat14 of an empty (or zero-weight) array");
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let minimum = pts[0].0;
    let maximum = pts[pts.len() - 1].0;
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let energy: f64 = pts.iter().map(|&(v, w)| w * v * v).sum();
    let constant = maximum == minimum;
    let mean = if constant {
        minimum
    } else {
        pts.iter().map(|&(v, w)| w * v).sum::<f64>() / total
    };

    let (mut m2, mut m3, mut m4, mut mad) = (0.0, 0.0, 0.0, 0.0);
    if !constant {
        for &(v, w) in &pts {
            let d = v - mean;
            let d2 = d * d;
            m2 += w * d2;
            m3 += w * d2 * d;
            m4 += w * d2 * d2;
            mad += w * d.abs();
        }
        m2 /= total;
        m3 /= total;
        m4 /= total;
        mad /= total;
    }
    let std = m2.sqrt();
    let (skewness, kurtosis) = if std > 0.0 {
        (m3 / (std * m2), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let half = total / 2.0;
    let mut cum = 0.0;
    let mut median = maximum;
    for (k, &(v, w)) in pts.iter().enumerate() {
        cum += w;
        if cum >= half {
            median = if cum == half && k + 1 < pts.len() {
                (v + pts[k + 1].0) / 2.0
            } else {
                v
            };
            break;
        }
    }

    let mut hist = [0.0f64; HIST_BINS];
    for &(v, w) in &pts {
        hist[crate::segment::histogram_bin(v, minimum, maximum, HIST_BINS)] += w;
    }
    let (mut entropy, mut uniformity) = (0.0, 0.0);
    for &c in hist.iter().filter(|&&c| c > 0.0) {
        let p = c / total;
        entropy -= p * p.log2();
        uniformity += p * p;
    }

    Ok(StatDescriptor14 {
        area,
        mean,
        standard_deviation: std,
        energy,
        median,
        skewness,
        entropy,
        maximum,
        minimum,
        mean_absolute_deviation: mad,
        kurtosis,
        range: maximum - minimum,
        root_mean_square: (energy / total).sqrt(),
        uniformity,
    })
}
