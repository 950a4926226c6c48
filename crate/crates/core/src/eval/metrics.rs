//! Confusion matrices and one-vs-rest metrics.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return arg_err(format!("{} true labels vs {} predictions", truth.len(), predicted.len()));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return arg_err(format!("label pair ({t}, {p}) outside 0..{classes}"));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f_measure: f64,
}

impl ClassMetrics {
    fn mean(items: &[ClassMetrics]) -> ClassMetrics {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&ClassMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        ClassMetrics {
            sensitivity: sum(|m| m.sensitivity),
            specificity: sum(|m| m.specificity),
            precision: sum(|m| m.precision),
            f_measure: sum(|m| m.f_measure),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    /// Classes where some ratio was 0/0 and was set to 0.
    pub degenerate_classes: Vec<usize>,
    pub macro_avg: ClassMetrics,
    /// Percent.
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let total = cm.total();
    let mut degenerate_classes = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..cm.classes())
        .map(|c| {
            let tp = cm.counts[c][c];
            let fn_ = cm.counts[c].iter().sum::<u64>() - tp;
            let fp = cm.counts.iter().map(|r| r[c]).sum::<u64>() - tp;
            let tn = total - tp - fn_ - fp;
            let mut deg = false;
            let sensitivity = ratio(tp, tp + fn_, &mut deg);
            let specificity = ratio(tn, tn + fp, &mut deg);
            let precision = ratio(tp, tp + fp, &mut deg);
            let f_measure = if precision + sensitivity > 0.0 {
                2.0 * precision * sensitivity / (precision + sensitivity)
            } else {
                deg = true;
                0.0
            };
            if deg {
                degenerate_classes.push(c);
            }
            ClassMetrics {
                sensitivity,
                specificity,
                precision,
                f_measure,
            }
        })
        .collect();
    Metrics {
        macro_avg: ClassMetrics::mean(&per_class),
        per_class,
        degenerate_classes,
        accuracy: if total == 0 { 0.0 } else { 100.0 * cm.trace() as f64 / total as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Fold-averaged metrics; `accuracy_std` is the sample standard deviation of
/// the fold accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: ClassMetrics,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub degenerate_classes: Vec<usize>,
    pub folds: Vec<FoldRecord>,
}

pub fn aggregate(folds: Vec<FoldRecord>) -> MetricsReport {
    let k = folds.first().map_or(0, |f| f.metrics.per_class.len());
    let per_class = (0..k)
        .map(|c| ClassMetrics::mean(&folds.iter().map(|f| f.metrics.per_class[c]).collect::<Vec<_>>()))
        .collect();
    let macro_avg = ClassMetrics::mean(&folds.iter().map(|f| f.metrics.macro_avg).collect::<Vec<_>>());
    let acc: Vec<f64> = folds.iter().map(|f| f.metrics.accuracy).collect();
    let n = acc.len() as f64;
    let accuracy_mean = acc.iter().sum::<f64>() / n.max(1.0);
    let accuracy_std = if acc.len() > 1 {
        (acc.iter().map(|a| (a - accuracy_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut degenerate_classes: Vec<usize> = folds.iter().flat_map(|f| f.metrics.degenerate_classes.iter().copied()).collect();
    degenerate_classes.sort_unstable();
    degenerate_classes.dedup();
    MetricsReport {
        per_class,
        macro_avg,
        accuracy_mean,
        accuracy_std,
        degenerate_classes,
        folds,
    }
}
