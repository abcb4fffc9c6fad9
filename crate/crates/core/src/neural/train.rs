use log::info;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::data::LabeledImageSet;
use super::layer::{argmax_first, LayerGrad, Layered, MlpModel};
use super::vae::VaeModel;
use super::NeuralError;
use crate::rng::SimRng;

const SHUFFLE_STREAM: u64 = 0x5_4FF1E;
const NOISE_STREAM: u64 = 0xE_9510;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Negative ELBO with KL weight `beta`.
    VaeElbo {
        beta: f64,
    },
    SoftmaxCrossEntropy,
}

impl Objective {
    fn name(&self) -> &'static str {
        match self {
            Objective::VaeElbo { .. } => "VaeElbo",
            Objective::SoftmaxCrossEntropy => "SoftmaxCrossEntropy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const fn sgd_momentum() -> Self {
        Optimizer::Sgd { momentum: 0.9 }
    }

    pub const fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    /// 5 epochs of SGD with momentum, lr 0.05, batches of 64.
    pub const fn classifier_recipe(seed: u64) -> Self {
        Self { epochs: 5, lr: 0.05, batch_size: 64, seed, optimizer: Optimizer::sgd_momentum() }
    }

    /// 10 epochs of SGD with momentum, lr 1e-3, batches of 128.
    pub const fn vae_recipe(seed: u64) -> Self {
        Self { epochs: 10, lr: 1e-3, batch_size: 128, seed, optimizer: Optimizer::sgd_momentum() }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(NeuralError::InvalidConfig("lr must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Batch-mean loss, split into its terms (`recon`/`kl` are zero for classifiers).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
}

impl TrainReport {
    /// `epoch,total,recon,kl` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,total,recon,kl\n");
        for e in &self.history {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.total, e.recon, e.kl));
        }
        s
    }
}

/// A model that can compute a batch loss and its parameter gradients.
pub trait Trainable: Layered {
    /// Width of the per-sample noise the objective consumes (0 if none).
    fn noise_dim(&self, objective: &Objective) -> usize;

    fn loss_and_grads(
        &self,
        objective: &Objective,
        x: &Array2<f64>,
        labels: &[u8],
        noise: Option<&Array2<f64>>,
    ) -> Result<(LossParts, Vec<LayerGrad>), NeuralError>;
}

impl Trainable for MlpModel {
    fn noise_dim(&self, _: &Objective) -> usize {
        0
    }

    fn loss_and_grads(
        &self,
        objective: &Objective,
        x: &Array2<f64>,
        labels: &[u8],
        _noise: Option<&Array2<f64>>,
    ) -> Result<(LossParts, Vec<LayerGrad>), NeuralError> {
        if *objective != Objective::SoftmaxCrossEntropy {
            return Err(NeuralError::ObjectiveMismatch { objective: objective.name() });
        }
        let trace = self.forward_trace(x.clone());
        let (loss, d_logits) = softmax_cross_entropy(trace.output().view(), labels);
        let (grads, _) = self.backward(&trace, d_logits);
        Ok((LossParts { total: loss, recon: 0.0, kl: 0.0 }, grads))
    }
}

impl Trainable for VaeModel {
    fn noise_dim(&self, _: &Objective) -> usize {
        self.latent_dim()
    }

    fn loss_and_grads(
        &self,
        objective: &Objective,
        x: &Array2<f64>,
        _labels: &[u8],
        noise: Option<&Array2<f64>>,
    ) -> Result<(LossParts, Vec<LayerGrad>), NeuralError> {
        match *objective {
            Objective::VaeElbo { beta } => Ok(VaeModel::loss_and_grads(self, x, noise, beta)),
            _ => Err(NeuralError::ObjectiveMismatch { objective: objective.name() }),
        }
    }
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: ArrayView2<'_, f64>, labels: &[u8]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut grad = Array2::<f64>::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, (row, mut g)) in logits.axis_iter(Axis(0)).zip(grad.axis_iter_mut(Axis(0))).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        let y = labels[i] as usize;
        loss += log_sum - row[y];
        Zip::from(&mut g).and(&row).for_each(|g, &v| *g = (v - log_sum).exp() / n);
        g[y] -= 1.0 / n;
    }
    (loss / n, grad)
}

enum OptState {
    Sgd { velocity: Vec<LayerGrad> },
    Adam { m: Vec<LayerGrad>, v: Vec<LayerGrad>, t: i32 },
}

impl OptState {
    fn new(opt: &Optimizer, layers: &[&super::layer::DenseLayer]) -> Self {
        let zeros = || layers.iter().map(|l| LayerGrad::zeros_like(l)).collect::<Vec<_>>();
        match opt {
            Optimizer::Sgd { .. } => OptState::Sgd { velocity: zeros() },
            Optimizer::Adam { .. } => OptState::Adam { m: zeros(), v: zeros(), t: 0 },
        }
    }

    fn step<M: Layered + ?Sized>(&mut self, opt: &Optimizer, lr: f64, model: &mut M, grads: &[LayerGrad]) {
        match (self, *opt) {
            (OptState::Sgd { velocity }, Optimizer::Sgd { momentum }) => {
                for ((layer, vel), g) in model.layers_mut().into_iter().zip(velocity.iter_mut()).zip(grads) {
                    sgd_update(&mut layer.weights, &mut vel.weights, &g.weights, momentum, lr);
                    sgd_update1(&mut layer.bias, &mut vel.bias, &g.bias, momentum, lr);
                }
            }
            (OptState::Adam { m, v, t }, Optimizer::Adam { beta1, beta2, eps }) => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                let upd = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                for (((layer, ml), vl), g) in
                    model.layers_mut().into_iter().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads)
                {
                    Zip::from(&mut layer.weights)
                        .and(&mut ml.weights)
                        .and(&mut vl.weights)
                        .and(&g.weights)
                        .for_each(|w, m, v, &g| upd(w, m, v, g));
                    Zip::from(&mut layer.bias)
                        .and(&mut ml.bias)
                        .and(&mut vl.bias)
                        .and(&g.bias)
                        .for_each(|w, m, v, &g| upd(w, m, v, g));
                }
            }
            _ => unreachable!("optimizer state built from the same config"),
        }
    }
}

fn sgd_update(w: &mut Array2<f64>, vel: &mut Array2<f64>, g: &Array2<f64>, momentum: f64, lr: f64) {
    Zip::from(w).and(vel).and(g).for_each(|w, v, &g| {
        *v = momentum * *v + g;
        *w -= lr * *v;
    });
}

fn sgd_update1(w: &mut Array1<f64>, vel: &mut Array1<f64>, g: &Array1<f64>, momentum: f64, lr: f64) {
    Zip::from(w).and(vel).and(g).for_each(|w, v, &g| {
        *v = momentum * *v + g;
        *w -= lr * *v;
    });
}

/// Mini-batch training. Shuffling and reparameterization noise come from
/// separate seeded streams, and batches are processed strictly in order, so a
/// seed fully determines the final weights.
pub fn train<M: Trainable>(
    model: &mut M,
    data: &LabeledImageSet,
    objective: Objective,
    config: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut shuffle_rng = SimRng::derive(config.seed, SHUFFLE_STREAM);
    let mut noise_rng = SimRng::derive(config.seed, NOISE_STREAM);
    let mut state = OptState::new(&config.optimizer, &model.layers());
    let noise_dim = model.noise_dim(&objective);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut sums = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let x = data.batch(chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| data.label(i)).collect();
            let noise =
                (noise_dim > 0).then(|| Array2::from_shape_fn((chunk.len(), noise_dim), |_| noise_rng.normal()));
            let (parts, grads) = model.loss_and_grads(&objective, &x, &labels, noise.as_ref())?;
            if !parts.total.is_finite() {
                return Err(NeuralError::TrainingDiverged { epoch });
            }
            let w = chunk.len() as f64;
            sums.total += parts.total * w;
            sums.recon += parts.recon * w;
            sums.kl += parts.kl * w;
            state.step(&config.optimizer, config.lr, model, &grads);
        }
        let n = data.len() as f64;
        let e = EpochLoss { epoch, total: sums.total / n, recon: sums.recon / n, kl: sums.kl / n };
        info!("epoch {epoch}: loss {:.5} (recon {:.5}, kl {:.5})", e.total, e.recon, e.kl);
        history.push(e);
    }
    if model.layers().iter().any(|l| !l.is_finite()) {
        return Err(NeuralError::TrainingDiverged { epoch: config.epochs });
    }
    Ok(TrainReport { history })
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn evaluate_accuracy(classifier: &MlpModel, data: &LabeledImageSet) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(1000) {
        let logits = classifier.forward(data.batch(chunk).view());
        for (row, &i) in logits.axis_iter(Axis(0)).zip(chunk) {
            let row: Vec<f64> = row.to_vec();
            if argmax_first(&row) == data.label(i) as usize {
                correct += 1;
            }
        }
    }
    correct as f64 / data.len() as f64
}
