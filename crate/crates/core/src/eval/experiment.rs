//! The cross-validated experiment matrix comparing the direct pixel model
//! with every feature-analysis variant.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{stratified_kfold, train_indices};
use super::metrics::{aggregate, confusion, metrics, FoldRecord, MetricsReport};
use crate::dimred::{self, AeTrainConfig, Sparsity};
use crate::elm::{elm_train, ElmConfig, IterativeConfig, TrainingMode, DICDM_HIDDEN, RIDGE};
use crate::error::{arg_err, Error, Result};
use crate::features::FeatureSubset;
use crate::featselect::{self, ForestConfig, SelectMethod};
use crate::matrix::{FeatureMatrix, Standardizer};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentRow {
    Dicdm,
    Texture,
    Glcm,
    Gldm,
    Fft,
    Dwt,
    All,
    Frequency,
    Spatial,
    Pca,
    Kpca,
    SparseAe,
    StackedAe,
    Anova,
    ChiSquare,
    Rf,
}

impl ExperimentRow {
    pub const ALL: [ExperimentRow; 16] = [
        Self::Dicdm,
        Self::Texture,
        Self::Glcm,
        Self::Gldm,
        Self::Fft,
        Self::Dwt,
        Self::All,
        Self::Frequency,
        Self::Spatial,
        Self::Pca,
        Self::Kpca,
        Self::SparseAe,
        Self::StackedAe,
        Self::Anova,
        Self::ChiSquare,
        Self::Rf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Dicdm => "DICDM",
            Self::Texture => "Texture",
            Self::Glcm => "GLCM",
            Self::Gldm => "GLDM",
            Self::Fft => "FFT",
            Self::Dwt => "DWT",
            Self::All => "All",
            Self::Frequency => "Frequency",
            Self::Spatial => "Spatial",
            Self::Pca => "PCA",
            Self::Kpca => "KPCA",
            Self::SparseAe => "SparseAE",
            Self::StackedAe => "StackedAE",
            Self::Anova => "Anova",
            Self::ChiSquare => "Chi-square",
            Self::Rf => "RF",
        }
    }

    pub fn stage(self) -> &'static str {
        match self {
            Self::Dicdm => "DICDM",
            Self::Pca | Self::Kpca | Self::SparseAe | Self::StackedAe => "DRA",
            Self::Anova | Self::ChiSquare | Self::Rf => "FSA",
            _ => "FEA",
        }
    }

    /// Case-insensitive; ignores `-` and `_`.
    pub fn parse(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|r| r.label().replace('-', "").to_lowercase() == key)
            .ok_or_else(|| Error::Argument(format!("unknown experiment row {s:?}")))
    }

    /// `all` or a comma-separated list of row names.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        let mut rows = s.split(',').map(|p| Self::parse(p.trim())).collect::<Result<Vec<_>>>()?;
        rows.sort_unstable();
        rows.dedup();
        Ok(rows)
    }

    fn subset(self) -> Option<FeatureSubset> {
        Some(match self {
            Self::Texture => FeatureSubset::Texture,
            Self::Glcm => FeatureSubset::Glcm,
            Self::Gldm => FeatureSubset::Gldm,
            Self::Fft => FeatureSubset::Fft,
            Self::Dwt => FeatureSubset::Dwt,
            Self::All => FeatureSubset::All,
            Self::Frequency => FeatureSubset::Frequency,
            Self::Spatial => FeatureSubset::Spatial,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub seed: u64,
    pub elm_mode: TrainingMode,
    pub ridge: f64,
    pub iterative: IterativeConfig,
    pub dicdm_hidden: usize,
    pub pca_components: usize,
    pub kpca_components: usize,
    /// RBF width; `None` uses `1 / (d · mean variance)`.
    pub kpca_gamma: Option<f64>,
    pub sparse_ae_bottleneck: usize,
    pub stacked_ae_bottleneck: usize,
    pub stacked_ae_hidden: Option<usize>,
    pub sparsity: Sparsity,
    pub autoencoder: AeTrainConfig,
    pub anova_k: usize,
    pub chi_square_k: usize,
    pub rf_k: usize,
    pub forest: ForestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            elm_mode: TrainingMode::ClosedForm,
            ridge: RIDGE,
            iterative: IterativeConfig::default(),
            dicdm_hidden: DICDM_HIDDEN,
            pca_components: dimred::PCA_COMPONENTS,
            kpca_components: dimred::KPCA_COMPONENTS,
            kpca_gamma: None,
            sparse_ae_bottleneck: dimred::SPARSE_AE_BOTTLENECK,
            stacked_ae_bottleneck: dimred::STACKED_AE_BOTTLENECK,
            stacked_ae_hidden: None,
            sparsity: Sparsity::default(),
            autoencoder: AeTrainConfig::default(),
            anova_k: featselect::ANOVA_K,
            chi_square_k: featselect::CHI_SQUARE_K,
            rf_k: featselect::RF_K,
            forest: ForestConfig::default(),
        }
    }
}

/// Inputs shared by every row: the 252-feature matrix and, for the direct
/// model, flattened pixel planes in the same sample order.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub features: FeatureMatrix,
    pub pixels: Option<FeatureMatrix>,
    /// E.g. `64x64`.
    pub pixel_size: String,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCall {
    Fit,
    Transform,
}

/// One fit or transform call of a fold, with the sample indices it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub row: ExperimentRow,
    pub fold: usize,
    pub stage: String,
    pub call: AuditCall,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub row: ExperimentRow,
    pub label: String,
    pub stage: String,
    /// Classifier input width (`None` if the row failed before it was known).
    pub n_features: Option<usize>,
    pub hidden: Option<usize>,
    pub error: Option<String>,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub folds: usize,
    pub elm_mode: TrainingMode,
    pub n_samples: usize,
    pub class_names: Vec<String>,
    pub pixel_size: String,
    pub audit_checked: bool,
    pub rows: Vec<RowResult>,
}

impl ExperimentReport {
    pub fn row(&self, r: ExperimentRow) -> Option<&RowResult> {
        self.rows.iter().find(|x| x.row == r)
    }

    pub fn accuracy(&self, r: ExperimentRow) -> Option<f64> {
        self.row(r)?.metrics.as_ref().map(|m| m.accuracy_mean)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        match v.get("schema_version").and_then(|s| s.as_u64()) {
            Some(s) if s == u64::from(SCHEMA_VERSION) => {}
            Some(s) => {
                return Err(Error::SchemaVersion {
                    expected: SCHEMA_VERSION,
                    found: s as u32,
                })
            }
            None => return Err(Error::Serde("report has no schema_version".into())),
        }
        serde_json::from_value(v).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct FoldOutcome {
    record: FoldRecord,
    n_features: usize,
    hidden: usize,
    audit: Vec<AuditEntry>,
}

struct Fold<'a> {
    row: ExperimentRow,
    fold: usize,
    train: &'a [usize],
    test: &'a [usize],
    audit: Vec<AuditEntry>,
}

impl Fold<'_> {
    fn log(&mut self, stage: &str, call: AuditCall, indices: &[usize]) {
        self.audit.push(AuditEntry {
            row: self.row,
            fold: self.fold,
            stage: stage.to_string(),
            call,
            indices: indices.to_vec(),
        });
    }

    /// Fits z-scores on the training rows and applies them to both sides.
    fn standardize(&mut self, stage: &str, tr: &FeatureMatrix, te: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let s = Standardizer::fit(tr)?;
        let (train, test) = (self.train.to_vec(), self.test.to_vec());
        self.log(stage, AuditCall::Fit, &train);
        self.log(stage, AuditCall::Transform, &train);
        self.log(stage, AuditCall::Transform, &test);
        Ok((s.apply(tr)?, s.apply(te)?))
    }

    fn fitted(&mut self, stage: &str) {
        let (train, test) = (self.train.to_vec(), self.test.to_vec());
        self.log(stage, AuditCall::Fit, &train);
        self.log(stage, AuditCall::Transform, &train);
        self.log(stage, AuditCall::Transform, &test);
    }
}

fn run_fold(data: &ExperimentData, cfg: &ExperimentConfig, folds: &[Vec<usize>], row: ExperimentRow, f: usize) -> Result<FoldOutcome> {
    let train = train_indices(folds, f);
    let test = &folds[f];
    let mut fold = Fold {
        row,
        fold: f,
        train: &train,
        test,
        audit: Vec::new(),
    };
    let seed = rng::derive_seed(cfg.seed, &[row as u64, f as u64]);
    let feats = &data.features;

    let (xtr, xte, hidden) = if row == ExperimentRow::Dicdm {
        let px = data.pixels.as_ref().ok_or_else(|| Error::Argument("DICDM row needs pixel inputs".into()))?;
        (px.select_rows(&train), px.select_rows(test), cfg.dicdm_hidden)
    } else {
        let (tr, te) = if let Some(sub) = row.subset() {
            let cols: Vec<usize> = sub.range().collect();
            let (tr, te) = (feats.select_rows(&train).select_cols(&cols), feats.select_rows(test).select_cols(&cols));
            fold.standardize("standardize", &tr, &te)?
        } else {
            let (tr, te) = fold.standardize("standardize", &feats.select_rows(&train), &feats.select_rows(test))?;
            let (tr, te) = match row {
                ExperimentRow::Pca => {
                    let m = dimred::pca_fit(&tr, cfg.pca_components)?;
                    fold.fitted("pca");
                    (dimred::pca_transform(&m, &tr)?, dimred::pca_transform(&m, &te)?)
                }
                ExperimentRow::Kpca => {
                    let m = dimred::kpca_fit(&tr, cfg.kpca_components, cfg.kpca_gamma)?;
                    fold.fitted("kpca");
                    (dimred::kpca_transform(&m, &tr)?, dimred::kpca_transform(&m, &te)?)
                }
                ExperimentRow::SparseAe | ExperimentRow::StackedAe => {
                    let ae = AeTrainConfig {
                        seed,
                        ..cfg.autoencoder
                    };
                    let m = if row == ExperimentRow::SparseAe {
                        dimred::sparse_ae_fit(&tr, cfg.sparse_ae_bottleneck, cfg.sparsity, &ae)?
                    } else {
                        dimred::stacked_ae_fit(&tr, cfg.stacked_ae_bottleneck, cfg.stacked_ae_hidden, &ae)?
                    };
                    fold.fitted("autoencoder");
                    (dimred::ae_encode(&m, &tr)?, dimred::ae_encode(&m, &te)?)
                }
                _ => {
                    let (method, k) = match row {
                        ExperimentRow::Anova => (SelectMethod::AnovaF, cfg.anova_k),
                        ExperimentRow::ChiSquare => (SelectMethod::ChiSquare, cfg.chi_square_k),
                        _ => (SelectMethod::RandomForest, cfg.rf_k),
                    };
                    let m = featselect::fit_selector(&tr, method, k, &cfg.forest, seed)?;
                    fold.fitted("select");
                    (featselect::select(&tr, &m)?, featselect::select(&te, &m)?)
                }
            };
            if row.stage() == "DRA" {
                fold.standardize("restandardize", &tr, &te)?
            } else {
                (tr, te)
            }
        };
        let h = 2 * tr.cols();
        (tr, te, h)
    };

    let elm_cfg = ElmConfig {
        hidden,
        mode: cfg.elm_mode,
        ridge: cfg.ridge,
        iterative: cfg.iterative,
        seed,
    };
    let model = elm_train(&xtr, &data.class_names, &elm_cfg)?;
    fold.log("elm", AuditCall::Fit, &train);
    let pred = model.predict(&xte)?;
    fold.log("elm", AuditCall::Transform, test);
    let cm = confusion(&xte.labels, &pred, data.class_names.len())?;
    Ok(FoldOutcome {
        record: FoldRecord {
            fold: f,
            test_size: test.len(),
            metrics: metrics(&cm),
            confusion: cm,
        },
        n_features: xtr.cols(),
        hidden,
        audit: fold.audit,
    })
}

/// Checks that every fit saw only training-fold samples.
pub fn verify_audit(audit: &[AuditEntry], folds: &[Vec<usize>]) -> Result<()> {
    for e in audit.iter().filter(|e| e.call == AuditCall::Fit) {
        if let Some(i) = e.indices.iter().find(|i| folds[e.fold].binary_search(i).is_ok()) {
            return arg_err(format!(
                "{} fold {} stage {} was fitted on test sample {i}",
                e.row.label(),
                e.fold,
                e.stage
            ));
        }
    }
    Ok(())
}

/// Runs every requested row over stratified folds. Rows and folds execute in
/// parallel; each fold derives its seed from `(seed, row, fold)`, so the
/// report does not depend on the thread count. A failing row records its
/// first fold error and the others continue.
pub fn run_experiment(data: &ExperimentData, rows: &[ExperimentRow], cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<AuditEntry>)> {
    let n = data.features.rows();
    if let Some(px) = &data.pixels {
        if px.rows() != n || px.labels != data.features.labels {
            return arg_err("pixel and feature matrices disagree on samples");
        }
    }
    let folds = stratified_kfold(&data.features.labels, cfg.folds, cfg.seed)?;
    let jobs: Vec<(ExperimentRow, usize)> = rows.iter().flat_map(|&r| (0..cfg.folds).map(move |f| (r, f))).collect();
    let outcomes: Vec<Result<FoldOutcome>> = jobs.par_iter().map(|&(r, f)| run_fold(data, cfg, &folds, r, f)).collect();

    let mut audit = Vec::new();
    let mut results = Vec::new();
    let mut it = outcomes.into_iter();
    for &row in rows {
        let mut records = Vec::new();
        let mut error = None;
        let (mut n_features, mut hidden) = (None, None);
        for o in it.by_ref().take(cfg.folds) {
            match o {
                Ok(o) => {
                    n_features = Some(o.n_features);
                    hidden = Some(o.hidden);
                    audit.extend(o.audit);
                    records.push(o.record);
                }
                Err(e) if error.is_none() => error = Some(e.to_string()),
                Err(_) => {}
            }
        }
        if let Some(e) = &error {
            log::warn!("row {} failed: {e}", row.label());
        }
        results.push(RowResult {
            row,
            label: row.label().to_string(),
            stage: row.stage().to_string(),
            n_features,
            hidden,
            metrics: if error.is_none() { Some(aggregate(records)) } else { None },
            error,
        });
    }
    verify_audit(&audit, &folds)?;
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        folds: cfg.folds,
        elm_mode: cfg.elm_mode,
        n_samples: n,
        class_names: data.class_names.clone(),
        pixel_size: data.pixel_size.clone(),
        audit_checked: true,
        rows: results,
    };
    Ok((report, audit))
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn cells(report: &ExperimentReport, r: &RowResult) -> [String; 8] {
    let features = match (r.row, r.n_features) {
        (ExperimentRow::Dicdm, _) => report.pixel_size.clone(),
        (_, Some(d)) => d.to_string(),
        (_, None) => "-".into(),
    };
    let head = [r.stage.clone(), r.label.clone(), features];
    match &r.metrics {
        Some(m) => {
            let a = m.macro_avg;
            [
                head[0].clone(),
                head[1].clone(),
                head[2].clone(),
                pct(a.sensitivity),
                pct(a.specificity),
                pct(a.precision),
                pct(a.f_measure),
                format!("{:.2} ± {:.1}", m.accuracy_mean, m.accuracy_std),
            ]
        }
        None => {
            let failed = format!("failed ({})", r.error.as_deref().unwrap_or("unknown"));
            [head[0].clone(), head[1].clone(), head[2].clone(), "-".into(), "-".into(), "-".into(), "-".into(), failed]
        }
    }
}

const HEADER: [&str; 8] = ["Stage", "Model", "Features", "Sensitivity (%)", "Specificity (%)", "Precision (%)", "F-measure (%)", "Accuracy (%)"];

/// Fixed-width text table. Metrics are macro averages over classes and
/// folds; accuracy is the fold mean ± fold sample standard deviation.
pub fn render_table(report: &ExperimentReport) -> String {
    let rows: Vec<[String; 8]> = report.rows.iter().map(|r| cells(report, r)).collect();
    let widths: Vec<usize> = (0..8)
        .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([HEADER[j].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cols: Vec<&str>| {
        let padded: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, HEADER.to_vec());
    line(&mut out, widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in &rows {
        line(&mut out, r.iter().map(String::as_str).collect());
    }
    let _ = writeln!(
        out,
        "\n{} samples, {}-fold stratified CV, seed {}, ELM {}; ± is the sample std over folds.",
        report.n_samples,
        report.folds,
        report.seed,
        match report.elm_mode {
            TrainingMode::ClosedForm => "closed-form",
            TrainingMode::Iterative => "iterative",
        }
    );
    out
}

pub fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("stage,model,features,sensitivity,specificity,precision,f_measure,accuracy_mean,accuracy_std,error\n");
    for r in &report.rows {
        let c = cells(report, r);
        let (mean, std) = r.metrics.as_ref().map_or((String::new(), String::new()), |m| (m.accuracy_mean.to_string(), m.accuracy_std.to_string()));
        let metric = |s: &str| if s == "-" { String::new() } else { s.to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c[0],
            c[1],
            c[2],
            metric(&c[3]),
            metric(&c[4]),
            metric(&c[5]),
            metric(&c[6]),
            mean,
            std,
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_names_roundtrip() {
        for r in ExperimentRow::ALL {
            assert_eq!(ExperimentRow::parse(r.label()).unwrap(), r);
        }
        assert_eq!(ExperimentRow::parse("chisquare").unwrap(), ExperimentRow::ChiSquare);
        assert_eq!(ExperimentRow::parse_list("all").unwrap().len(), 16);
        assert_eq!(ExperimentRow::parse_list("KPCA, pca").unwrap(), vec![ExperimentRow::Pca, ExperimentRow::Kpca]);
        assert!(ExperimentRow::parse("lda").is_err());
    }

    #[test]
    fn audit_catches_leak() {
        let folds = vec![vec![0, 2], vec![1, 3]];
        let entry = |idx: Vec<usize>| AuditEntry {
            row: ExperimentRow::Pca,
            fold: 0,
            stage: "pca".into(),
            call: AuditCall::Fit,
            indices: idx,
        };
        assert!(verify_audit(&[entry(vec![1, 3])], &folds).is_ok());
        assert!(verify_audit(&[entry(vec![1, 2])], &folds).is_err());
    }

    fn toy_data() -> ExperimentData {
        let n = 120;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let names = crate::features::canonical_names().to_vec();
        let values: Vec<f64> = (0..n * 252)
            .map(|k| {
                let (i, j) = (k / 252, k % 252);
                labels[i] as f64 * ((j % 7) as f64 - 3.0) + ((k * 2654435761usize) % 1000) as f64 / 500.0
            })
            .collect();
        ExperimentData {
            features: FeatureMatrix::new(n, 252, values, names, labels).unwrap(),
            pixels: None,
            pixel_size: "8x8".into(),
            class_names: vec!["a".into(), "b".into(), "c".into()],
        }
    }

    #[test]
    fn small_experiment_and_failed_row() {
        let data = toy_data();
        let cfg = ExperimentConfig {
            folds: 5,
            seed: 3,
            ..Default::default()
        };
        let rows = [ExperimentRow::Dicdm, ExperimentRow::Glcm, ExperimentRow::Pca, ExperimentRow::Anova];
        let (report, audit) = run_experiment(&data, &rows, &cfg).unwrap();
        assert!(report.row(ExperimentRow::Dicdm).unwrap().error.is_some());
        assert_eq!(report.row(ExperimentRow::Glcm).unwrap().n_features, Some(56));
        assert_eq!(report.row(ExperimentRow::Pca).unwrap().n_features, Some(70));
        assert_eq!(report.row(ExperimentRow::Anova).unwrap().hidden, Some(100));
        assert!(report.accuracy(ExperimentRow::Glcm).unwrap() > 90.0);
        assert!(!audit.is_empty());
        let table = render_table(&report);
        assert!(table.contains("failed ("));
        assert_eq!(ExperimentReport::from_json(&report.to_json().unwrap()).unwrap(), report);
        let (again, _) = run_experiment(&data, &rows, &cfg).unwrap();
        assert_eq!(again.to_json().unwrap(), report.to_json().unwrap());
    }
}
