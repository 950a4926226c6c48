//! Fully-connected sigmoid autoencoders trained with mini-batch Adam.
//!
//! Loss per batch of `B` rows and `d` columns:
//! `Σ (x - x̂)² / (B d) + γ Σ_j KL(ρ ‖ p_j)`, where `p_j` is the batch-mean
//! activation of code unit `j`. The KL term is present only for the sparse
//! variant.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    pub rho: f64,
    pub gamma: f64,
}

impl Default for Sparsity {
    fn default() -> Self {
        Self {
            rho: 0.05,
            gamma: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.001,
            batch: 16,
            seed: 0,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ρ ln(ρ/p) + (1-ρ) ln((1-ρ)/(1-p))`.
pub fn kl_divergence(rho: f64, p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    rho * (rho / p).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub layer_sizes: Vec<usize>,
    /// Layer `k` maps `layer_sizes[k]` inputs to `layer_sizes[k+1]` outputs;
    /// weights are stored `in x out`.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    /// Number of encoder layers; the output of layer `code_layer - 1` is the code.
    pub code_layer: usize,
    pub sparsity: Option<Sparsity>,
    /// Per-column min-max rescaling fitted on the training data.
    pub input_min: Vec<f64>,
    pub input_span: Vec<f64>,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
}

impl AutoencoderModel {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn init(layer_sizes: &[usize], code_layer: usize, sparsity: Option<Sparsity>, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 || code_layer == 0 || code_layer >= layer_sizes.len() - 1 {
            return arg_err(format!("invalid autoencoder layout {layer_sizes:?} (code layer {code_layer})"));
        }
        if layer_sizes.first() != layer_sizes.last() || layer_sizes.contains(&0) {
            return arg_err(format!("autoencoder must reconstruct its input: {layer_sizes:?}"));
        }
        let mut r = rng::stream(seed, &[0xae]);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push(DMatrix::from_fn(w[0], w[1], |_, _| r.gen_range(-limit..limit)));
            biases.push(DVector::zeros(w[1]));
        }
        let d = layer_sizes[0];
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            code_layer,
            sparsity,
            input_min: vec![0.0; d],
            input_span: vec![1.0; d],
            loss_history: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.layer_sizes[self.code_layer]
    }

    fn layer_forward(&self, k: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = a * &self.weights[k];
        let b = &self.biases[k];
        for mut row in z.row_iter_mut() {
            for (v, bj) in row.iter_mut().zip(b.iter()) {
                *v = sigmoid(*v + bj);
            }
        }
        z
    }

    /// Activations of every layer, input first.
    pub fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![x.clone()];
        for k in 0..self.weights.len() {
            let next = self.layer_forward(k, acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    pub fn encode_rescaled(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        for k in 0..self.code_layer {
            a = self.layer_forward(k, &a);
        }
        a
    }

    pub fn rescale(&self, m: &FeatureMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(m.rows(), m.cols(), |i, j| (m.get(i, j) - self.input_min[j]) / self.input_span[j])
    }

    /// Batch loss and its gradients with respect to every weight and bias.
    pub fn loss_and_gradients(&self, x: &DMatrix<f64>) -> (f64, Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
        let acts = self.forward(x);
        let (b, d) = (x.nrows() as f64, x.ncols() as f64);
        let out = acts.last().expect("non-empty");
        let diff = out - x;
        let mut loss = diff.norm_squared() / (b * d);

        let n_layers = self.weights.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n_layers];
        let mut gb = vec![DVector::zeros(0); n_layers];
        // gradient of the loss w.r.t. the current layer's activations
        let mut grad_a = diff * (2.0 / (b * d));
        for k in (0..n_layers).rev() {
            let a_out = &acts[k + 1];
            if k + 1 == self.code_layer {
                if let Some(sp) = self.sparsity {
                    for j in 0..a_out.ncols() {
                        let p = a_out.column(j).sum() / b;
                        loss += sp.gamma * kl_divergence(sp.rho, p);
                        let pc = p.clamp(1e-12, 1.0 - 1e-12);
                        let dkl = sp.gamma * (-sp.rho / pc + (1.0 - sp.rho) / (1.0 - pc)) / b;
                        grad_a.column_mut(j).add_scalar_mut(dkl);
                    }
                }
            }
            let delta = grad_a.component_mul(&a_out.map(|v| v * (1.0 - v)));
            gw[k] = acts[k].transpose() * &delta;
            gb[k] = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if k > 0 {
                grad_a = &delta * self.weights[k].transpose();
            }
        }
        (loss, gw, gb)
    }

    pub fn loss(&self, x: &DMatrix<f64>) -> f64 {
        let acts = self.forward(x);
        let (b, d) = (x.nrows() as f64, x.ncols() as f64);
        let mut loss = (acts.last().expect("non-empty") - x).norm_squared() / (b * d);
        if let Some(sp) = self.sparsity {
            let code = &acts[self.code_layer];
            for j in 0..code.ncols() {
                loss += sp.gamma * kl_divergence(sp.rho, code.column(j).sum() / b);
            }
        }
        loss
    }

    /// Mean squared reconstruction error per element.
    pub fn reconstruction_mse(&self, x: &DMatrix<f64>) -> f64 {
        let out = self.forward(x).pop().expect("non-empty");
        (out - x).norm_squared() / (x.nrows() * x.ncols()) as f64
    }

    /// Mini-batch Adam on already-rescaled data.
    pub fn train(&mut self, x: &DMatrix<f64>, cfg: &AeTrainConfig) -> Result<()> {
        if cfg.batch == 0 {
            return arg_err("batch size must be positive");
        }
        let n = x.nrows();
        let mut mw: Vec<DMatrix<f64>> = self.weights.iter().map(|w| w * 0.0).collect();
        let mut vw = mw.clone();
        let mut mb: Vec<DVector<f64>> = self.biases.iter().map(|b| b * 0.0).collect();
        let mut vb = mb.clone();
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            order.sort_unstable();
            order.shuffle(&mut rng::stream(cfg.seed, &[0xae5, epoch as u64]));
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(cfg.batch) {
                let batch = DMatrix::from_fn(chunk.len(), x.ncols(), |i, j| x[(chunk[i], j)]);
                let (loss, gw, gb) = self.loss_and_gradients(&batch);
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch: epoch + 1, loss });
                }
                epoch_loss += loss * chunk.len() as f64;
                t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                for k in 0..self.weights.len() {
                    for (((p, g), m), v) in self.weights[k]
                        .iter_mut()
                        .zip(gw[k].iter())
                        .zip(mw[k].iter_mut())
                        .zip(vw[k].iter_mut())
                    {
                        step(p, *g, m, v);
                    }
                    for (((p, g), m), v) in self.biases[k]
                        .iter_mut()
                        .zip(gb[k].iter())
                        .zip(mb[k].iter_mut())
                        .zip(vb[k].iter_mut())
                    {
                        step(p, *g, m, v);
                    }
                }
            }
            let mean = epoch_loss / n as f64;
            if !mean.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1, loss: mean });
            }
            self.loss_history.push(mean);
        }
        Ok(())
    }

    fn fit_rescaling(&mut self, m: &FeatureMatrix) {
        for j in 0..m.cols() {
            let lo = m.column(j).fold(f64::INFINITY, f64::min);
            let hi = m.column(j).fold(f64::NEG_INFINITY, f64::max);
            self.input_min[j] = lo;
            self.input_span[j] = if hi > lo { hi - lo } else { 1.0 };
        }
    }
}

fn fit(m: &FeatureMatrix, layers: &[usize], code_layer: usize, sparsity: Option<Sparsity>, cfg: &AeTrainConfig) -> Result<AutoencoderModel> {
    if m.rows() == 0 {
        return arg_err("autoencoder needs training rows");
    }
    let mut model = AutoencoderModel::init(layers, code_layer, sparsity, cfg.seed)?;
    model.fit_rescaling(m);
    let x = model.rescale(m);
    model.train(&x, cfg)?;
    Ok(model)
}

/// `d - bottleneck - d` autoencoder with a KL sparsity penalty on the code.
pub fn sparse_ae_fit(m: &FeatureMatrix, bottleneck: usize, sparsity: Sparsity, cfg: &AeTrainConfig) -> Result<AutoencoderModel> {
    let d = m.cols();
    if bottleneck == 0 || bottleneck >= d {
        return arg_err(format!("sparse AE bottleneck {bottleneck} must be in 1..{d}"));
    }
    fit(m, &[d, bottleneck, d], 1, Some(sparsity), cfg)
}

/// `d - hidden - bottleneck - hidden - d` autoencoder trained end to end.
/// `hidden` defaults to the midpoint `(d + bottleneck) / 2`.
pub fn stacked_ae_fit(m: &FeatureMatrix, bottleneck: usize, hidden: Option<usize>, cfg: &AeTrainConfig) -> Result<AutoencoderModel> {
    let d = m.cols();
    if bottleneck == 0 || bottleneck >= d {
        return arg_err(format!("stacked AE bottleneck {bottleneck} must be in 1..{d}"));
    }
    let hidden = hidden.unwrap_or((d + bottleneck) / 2);
    fit(m, &[d, hidden, bottleneck, hidden, d], 2, None, cfg)
}

/// Code-layer activations for every row of `m`.
pub fn ae_encode(model: &AutoencoderModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.cols() != model.input_dim() {
        return arg_err(format!("autoencoder expects {} columns, got {}", model.input_dim(), m.cols()));
    }
    let code = model.encode_rescaled(&model.rescale(m));
    let prefix = if model.sparsity.is_some() { "sae" } else { "ae" };
    FeatureMatrix::from_dmatrix(&code, prefix, m.labels.clone(), m.sample_ids.clone())
}
