//! Extreme learning machine: a random, fixed sigmoid hidden layer followed by
//! output weights solved in closed form (ridge least squares on one-hot
//! targets) or trained with softmax cross-entropy and Adam.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::matrix::{FeatureMatrix, Standardizer};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;
pub const RIDGE: f64 = 1e-6;
/// Hidden size of the direct pixel model.
pub const DICDM_HIDDEN: usize = 880;
/// Input size of the direct pixel model at 256×256.
pub const DICDM_FULL_INPUT: usize = 65_536;

const ROW_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    ClosedForm,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterativeConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 16,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub hidden: usize,
    pub mode: TrainingMode,
    pub ridge: f64,
    pub iterative: IterativeConfig,
    pub seed: u64,
}

impl ElmConfig {
    pub fn new(hidden: usize, seed: u64) -> Self {
        Self {
            hidden,
            mode: TrainingMode::ClosedForm,
            ridge: RIDGE,
            iterative: IterativeConfig::default(),
            seed,
        }
    }

    /// Feature-analysis model: twice as many hidden neurons as inputs.
    pub fn fadm(input_dim: usize, seed: u64) -> Self {
        Self::new(2 * input_dim, seed)
    }

    pub fn dicdm(seed: u64) -> Self {
        Self::new(DICDM_HIDDEN, seed)
    }

    pub fn with_mode(mut self, mode: TrainingMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub schema_version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `hidden_dim × input_dim`, row-major.
    pub input_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `hidden_dim × classes`, row-major.
    pub output_weights: Vec<f64>,
    pub class_names: Vec<String>,
    pub training_mode: TrainingMode,
    pub ridge: f64,
    pub seed: u64,
    /// Validation loss per epoch (iterative mode only).
    #[serde(default)]
    pub validation_losses: Vec<f64>,
    /// Epoch whose weights were restored by early stopping.
    #[serde(default)]
    pub best_epoch: Option<usize>,
    #[serde(default)]
    pub config_hash: Option<String>,
    /// Column names the model was trained on.
    #[serde(default)]
    pub input_names: Vec<String>,
    /// z-scores to apply to raw inputs before prediction.
    #[serde(default)]
    pub standardizer: Option<Standardizer>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl ElmModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn w(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.hidden_dim, self.input_dim, &self.input_weights)
    }

    pub fn beta(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.hidden_dim, self.n_classes(), &self.output_weights)
    }

    fn set_beta(&mut self, beta: &DMatrix<f64>) {
        self.output_weights = beta.transpose().as_slice().to_vec();
    }

    /// Hidden activations `sigmoid(X Wᵀ + b)`, assembled in fixed row blocks.
    pub fn hidden(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.cols() != self.input_dim {
            return arg_err(format!("model expects {} inputs, got {}", self.input_dim, x.cols()));
        }
        let wt = self.w().transpose();
        let l = self.hidden_dim;
        let blocks: Vec<Vec<f64>> = (0..x.rows())
            .collect::<Vec<_>>()
            .par_chunks(ROW_BLOCK)
            .map(|rows| {
                let xb = DMatrix::from_row_slice(rows.len(), x.cols(), &x.values()[rows[0] * x.cols()..(rows[0] + rows.len()) * x.cols()]);
                let mut h = xb * &wt;
                for mut r in h.row_iter_mut() {
                    for (v, b) in r.iter_mut().zip(&self.hidden_bias) {
                        *v = sigmoid(*v + b);
                    }
                }
                h.transpose().as_slice().to_vec()
            })
            .collect();
        Ok(DMatrix::from_row_slice(x.rows(), l, &blocks.concat()))
    }

    pub fn scores(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        Ok(self.hidden(x)? * self.beta())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let s = self.scores(x)?;
        Ok(s.row_iter().map(|r| softmax(&r.iter().copied().collect::<Vec<_>>())).collect())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        let s = self.scores(x)?;
        Ok(s.row_iter().map(|r| argmax(&r.iter().copied().collect::<Vec<_>>())).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64());
        match found {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::SchemaVersion {
                    expected: SCHEMA_VERSION,
                    found: v as u32,
                })
            }
            None => return Err(Error::Serde(format!("{}: missing schema_version", path.display()))),
        }
        let model: Self = serde_json::from_value(value).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        let k = model.n_classes();
        if model.input_weights.len() != model.hidden_dim * model.input_dim
            || model.hidden_bias.len() != model.hidden_dim
            || model.output_weights.len() != model.hidden_dim * k
        {
            return Err(Error::Serde(format!("{}: weight arrays disagree with dims", path.display())));
        }
        Ok(model)
    }
}

/// Numerically stable softmax.
pub fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = i;
        }
    }
    best
}

fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        t[(i, l)] = 1.0;
    }
    t
}

/// Ridge solution of `min ‖Hβ − T‖² + λ‖β‖²`. Uses the `n × n` dual system
/// when there are more hidden units than samples.
pub fn ridge_solve(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (n, l) = h.shape();
    let singular = || Error::Solver(format!("normal matrix not positive definite (n={n}, L={l}, ridge={lambda:e})"));
    if l > n {
        let a = h * h.transpose() + DMatrix::identity(n, n) * lambda;
        let y = a.cholesky().ok_or_else(singular)?.solve(t);
        Ok(h.transpose() * y)
    } else {
        let a = h.transpose() * h + DMatrix::identity(l, l) * lambda;
        let b = h.transpose() * t;
        Ok(a.cholesky().ok_or_else(singular)?.solve(&b))
    }
}

fn init_model(input_dim: usize, class_names: &[String], cfg: &ElmConfig) -> ElmModel {
    let mut r = rng::stream(cfg.seed, &[0xe1, 0]);
    let input_weights = (0..cfg.hidden * input_dim).map(|_| r.gen_range(-1.0..=1.0)).collect();
    let hidden_bias = (0..cfg.hidden).map(|_| r.gen_range(-1.0..=1.0)).collect();
    ElmModel {
        schema_version: SCHEMA_VERSION,
        input_dim,
        hidden_dim: cfg.hidden,
        input_weights,
        hidden_bias,
        output_weights: vec![0.0; cfg.hidden * class_names.len()],
        class_names: class_names.to_vec(),
        training_mode: cfg.mode,
        ridge: cfg.ridge,
        seed: cfg.seed,
        validation_losses: Vec::new(),
        best_epoch: None,
        config_hash: None,
        input_names: Vec::new(),
        standardizer: None,
    }
}

pub fn elm_train(x: &FeatureMatrix, class_names: &[String], cfg: &ElmConfig) -> Result<ElmModel> {
    let k = class_names.len();
    if k < 2 {
        return arg_err("ELM needs at least 2 classes");
    }
    if cfg.hidden == 0 || x.rows() == 0 || x.cols() == 0 {
        return arg_err("ELM needs a nonempty input and hidden layer");
    }
    if let Some(&l) = x.labels.iter().find(|&&l| l >= k) {
        return arg_err(format!("label {l} outside 0..{k}"));
    }
    if !(cfg.ridge >= 0.0) {
        return arg_err("ridge must be non-negative");
    }
    let mut model = init_model(x.cols(), class_names, cfg);
    model.input_names = x.names.clone();
    match cfg.mode {
        TrainingMode::ClosedForm => {
            let h = model.hidden(x)?;
            let beta = ridge_solve(&h, &one_hot(&x.labels, k), cfg.ridge)?;
            if beta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver("non-finite output weights".into()));
            }
            model.set_beta(&beta);
        }
        TrainingMode::Iterative => train_iterative(&mut model, x, &cfg.iterative, cfg.seed)?,
    }
    Ok(model)
}

fn cross_entropy(h: &DMatrix<f64>, beta: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let s = h * beta;
    let mut grad_s = DMatrix::zeros(s.nrows(), s.ncols());
    let mut loss = 0.0;
    let n = labels.len() as f64;
    for i in 0..s.nrows() {
        let p = softmax(&s.row(i).iter().copied().collect::<Vec<_>>());
        loss -= p[labels[i]].max(1e-300).ln();
        for (c, pc) in p.iter().enumerate() {
            grad_s[(i, c)] = (pc - f64::from(u8::from(c == labels[i]))) / n;
        }
    }
    (loss / n, h.transpose() * grad_s)
}

fn train_iterative(model: &mut ElmModel, x: &FeatureMatrix, it: &IterativeConfig, seed: u64) -> Result<()> {
    if !(it.validation_fraction > 0.0 && it.validation_fraction < 1.0) || it.batch == 0 || it.max_epochs == 0 {
        return arg_err("iterative ELM needs 0 < validation_fraction < 1, batch > 0 and max_epochs > 0");
    }
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[0xe1, 1]));
    let n_val = ((n as f64 * it.validation_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if n_val >= n {
        return arg_err("too few samples for a validation split");
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let h_all = model.hidden(x)?;
    let rows = |idx: &[usize]| DMatrix::from_fn(idx.len(), h_all.ncols(), |i, j| h_all[(idx[i], j)]);
    let labels = |idx: &[usize]| idx.iter().map(|&i| x.labels[i]).collect::<Vec<_>>();
    let (h_val, y_val) = (rows(val_idx), labels(val_idx));

    let k = model.n_classes();
    let mut beta = DMatrix::zeros(model.hidden_dim, k);
    let (mut m1, mut m2) = (beta.clone(), beta.clone());
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut step = 0i32;
    let mut best = (f64::INFINITY, beta.clone(), 0usize);
    let mut since_best = 0;
    let mut train_order = train_idx.to_vec();
    for epoch in 0..it.max_epochs {
        train_order.sort_unstable();
        train_order.shuffle(&mut rng::stream(seed, &[0xe1, 2, epoch as u64]));
        for chunk in train_order.chunks(it.batch) {
            let (_, g) = cross_entropy(&rows(chunk), &beta, &labels(chunk));
            step += 1;
            m1 = &m1 * b1 + &g * (1.0 - b1);
            m2 = &m2 * b2 + g.component_mul(&g) * (1.0 - b2);
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            beta.zip_zip_apply(&m1, &m2, |b, a, v| *b -= it.lr * (a / c1) / ((v / c2).sqrt() + eps));
        }
        let (val_loss, _) = cross_entropy(&h_val, &beta, &y_val);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_loss });
        }
        model.validation_losses.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, beta.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= it.patience {
                break;
            }
        }
    }
    model.best_epoch = Some(best.2);
    model.set_beta(&best.1);
    Ok(())
}

/// Flattens grayscale pixel planes (values in `[0,1]`) into a matrix for the
/// direct model.
pub fn pixel_matrix(planes: &[Vec<f64>], labels: Vec<usize>) -> Result<FeatureMatrix> {
    let d = planes.first().map_or(0, Vec::len);
    if planes.iter().any(|p| p.len() != d) {
        return arg_err("pixel planes differ in size");
    }
    let names = (0..d).map(|j| format!("px.{j}")).collect();
    FeatureMatrix::new(planes.len(), d, planes.concat(), names, labels)
}

/// Residual of the ridge normal equations relative to `‖HᵀT‖`.
pub fn normal_equation_residual(h: &DMatrix<f64>, t: &DMatrix<f64>, beta: &DMatrix<f64>, lambda: f64) -> f64 {
    let hth = h.transpose() * h;
    let rhs = h.transpose() * t;
    let r = &hth * beta + beta * lambda - &rhs;
    r.norm() / rhs.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    /// Two clusters on either side of the line x + y = 0 with margin 1.
    fn toy() -> FeatureMatrix {
        let mut v = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let c = i % 2;
            let s = if c == 0 { -1.0 } else { 1.0 };
            let t = (i / 2) as f64 * 0.3 - 1.5;
            v.extend([s * (0.5 + 0.1 * (i % 3) as f64) + t, s * 0.5 - t]);
            labels.push(c);
        }
        FeatureMatrix::new(20, 2, v, vec!["x".into(), "y".into()], labels).unwrap()
    }

    #[test]
    fn separable_toy_closed_form() {
        let m = toy();
        let model = elm_train(&m, &classes(2), &ElmConfig::new(40, 3)).unwrap();
        assert_eq!(model.predict(&m).unwrap(), m.labels);
        let h = model.hidden(&m).unwrap();
        let r = normal_equation_residual(&h, &one_hot(&m.labels, 2), &model.beta(), RIDGE);
        assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn primal_and_dual_agree() {
        let h = DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
        let t = one_hot(&[0, 1, 0, 1, 1], 2);
        let primal = ridge_solve(&h, &t, 1e-3).unwrap();
        let hd = h.transpose();
        let td = one_hot(&[0, 1, 0], 2);
        let dual = ridge_solve(&hd, &td, 1e-3).unwrap();
        assert!(normal_equation_residual(&h, &t, &primal, 1e-3) < 1e-10);
        assert!(normal_equation_residual(&hd, &td, &dual, 1e-3) < 1e-10);
    }

    #[test]
    fn reference_sizes() {
        assert_eq!(ElmConfig::fadm(65, 0).hidden, 130);
        assert_eq!(ElmConfig::fadm(252, 0).hidden, 504);
        assert_eq!(ElmConfig::dicdm(0).hidden, 880);
    }

    #[test]
    fn deterministic_weights() {
        let m = toy();
        let a = elm_train(&m, &classes(2), &ElmConfig::new(10, 9)).unwrap();
        let b = elm_train(&m, &classes(2), &ElmConfig::new(10, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.input_weights.iter().chain(&a.hidden_bias).all(|w| (-1.0..=1.0).contains(w)));
    }

    #[test]
    fn iterative_checkpoint_is_best() {
        let m = toy();
        let cfg = ElmConfig::new(40, 1).with_mode(TrainingMode::Iterative);
        let model = elm_train(&m, &classes(2), &cfg).unwrap();
        let best = model.best_epoch.unwrap();
        let at_best = model.validation_losses[best];
        assert!(model.validation_losses[best..].iter().all(|&l| at_best <= l));
    }

    #[test]
    fn input_dimension_checked() {
        let m = toy();
        let model = elm_train(&m, &classes(2), &ElmConfig::new(8, 0)).unwrap();
        let bad = FeatureMatrix::new(1, 3, vec![0.0; 3], vec!["a".into(), "b".into(), "c".into()], vec![0]).unwrap();
        assert!(matches!(model.predict(&bad), Err(Error::Argument(_))));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = toy();
        let model = elm_train(&m, &classes(6), &ElmConfig::new(12, 4)).unwrap();
        let p = dir.path().join("elm.json");
        model.save(&p).unwrap();
        let back = ElmModel::load(&p).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.scores(&m).unwrap(), model.scores(&m).unwrap());

        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(ElmModel::load(&p).is_err());
        std::fs::write(&p, text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1)).unwrap();
        assert!(matches!(ElmModel::load(&p), Err(Error::SchemaVersion { found: 99, .. })));
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(s in proptest::collection::vec(-50.0f64..50.0, 6), c in -100.0f64..100.0) {
            let p = softmax(&s);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn argmax_monotone_invariant(s in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let t: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(argmax(&s), argmax(&t));
        }
    }
}
