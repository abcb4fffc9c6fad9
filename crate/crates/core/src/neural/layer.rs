use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    ReLU,
    Sigmoid,
}

impl Activation {
    /// Code used in the weights file.
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::ReLU => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, NeuralError> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::ReLU),
            2 => Ok(Activation::Sigmoid),
            other => Err(NeuralError::BadActivation(other)),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::ReLU => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::ReLU => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer computing `act(x · Wᵀ + b)`; `weights` is
/// `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Gradient of a loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self { weights: Array2::zeros(layer.weights.raw_dim()), bias: Array1::zeros(layer.bias.raw_dim()) }
    }
}

impl DenseLayer {
    /// Seeded uniform initialization with zero bias. ReLU layers use the He
    /// bound `sqrt(6 / fan_in)`; other activations use `sqrt(6 / (fan_in + fan_out))`.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut SimRng) -> Self {
        let bound = match activation {
            Activation::ReLU => (6.0 / in_dim as f64).sqrt(),
            _ => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let weights = Array2::from_shape_fn((out_dim, in_dim), |_| rng.uniform(-bound, bound));
        Self { weights, bias: Array1::zeros(out_dim), activation }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { weights: Array2::zeros((out_dim, in_dim)), bias: Array1::zeros(out_dim), activation }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn preactivation(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let act = self.activation;
        self.preactivation(x).mapv_into(|z| act.apply(z))
    }

    /// Backward pass given the gradient with respect to the pre-activation.
    /// Returns the parameter gradient and the gradient with respect to the input.
    pub fn backward_preact(&self, input: ArrayView2<'_, f64>, d_preact: &Array2<f64>) -> (LayerGrad, Array2<f64>) {
        let weights = d_preact.t().dot(&input);
        let bias = d_preact.sum_axis(Axis(0));
        let d_input = d_preact.dot(&self.weights);
        (LayerGrad { weights, bias }, d_input)
    }

    /// Convert a gradient w.r.t. this layer's output into one w.r.t. its pre-activation.
    pub fn output_grad_to_preact(&self, output: &Array2<f64>, mut d_out: Array2<f64>) -> Array2<f64> {
        let act = self.activation;
        if act != Activation::Identity {
            Zip::from(&mut d_out).and(output).for_each(|g, &a| *g *= act.derivative_from_output(a));
        }
        d_out
    }

    pub fn round_to_f32(&mut self) {
        self.weights.mapv_inplace(|w| w as f32 as f64);
        self.bias.mapv_inplace(|b| b as f32 as f64);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Anything made of an ordered list of dense layers. The order is the
/// canonical parameter order used by optimizers, gradient checks and files.
pub trait Layered {
    fn layers(&self) -> Vec<&DenseLayer>;
    fn layers_mut(&mut self) -> Vec<&mut DenseLayer>;

    fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    fn round_to_f32(&mut self) {
        for l in self.layers_mut() {
            l.round_to_f32();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer activations kept for the backward pass; `acts[0]` is the input.
pub(crate) struct MlpTrace {
    pub acts: Vec<Array2<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("trace holds the input at least")
    }
}

impl MlpModel {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NeuralError> {
        let model = Self { layers };
        model.check_chain()?;
        Ok(model)
    }

    /// Seeded model with the given layer widths, e.g. `[784, 128, 10]`.
    pub fn init(widths: &[usize], hidden: Activation, output: Activation, rng: &mut SimRng) -> Self {
        assert!(widths.len() >= 2, "need at least input and output width");
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::init(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    /// The 784→128 (ReLU)→10 digit classifier with raw logits as output.
    pub fn classifier(seed: u64) -> Self {
        let mut rng = SimRng::derive(seed, 0xC1A5);
        Self::init(&[784, 128, 10], Activation::ReLU, Activation::Identity, &mut rng)
    }

    pub fn check_chain(&self) -> Result<(), NeuralError> {
        if self.layers.is_empty() {
            return Err(NeuralError::DimMismatch { expected: 1, got: 0 });
        }
        for w in self.layers.windows(2) {
            if w[1].in_dim() != w[0].out_dim() {
                return Err(NeuralError::DimMismatch { expected: w[0].out_dim(), got: w[1].in_dim() });
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.out_dim() {
                return Err(NeuralError::DimMismatch { expected: l.out_dim(), got: l.bias.len() });
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = self.layers[0].forward(x);
        for l in &self.layers[1..] {
            a = l.forward(a.view());
        }
        a
    }

    /// Forward pass on a single sample.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::DimMismatch { expected: self.input_dim(), got: x.len() });
        }
        let view = ArrayView2::from_shape((1, x.len()), x).expect("1×n view");
        Ok(self.forward(view).into_raw_vec_and_offset().0)
    }

    pub(crate) fn forward_trace(&self, x: Array2<f64>) -> MlpTrace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for l in &self.layers {
            let next = l.forward(acts.last().unwrap().view());
            acts.push(next);
        }
        MlpTrace { acts }
    }

    /// Backpropagate from the gradient w.r.t. the last layer's pre-activation.
    /// Returns per-layer gradients (in layer order) and the input gradient.
    pub(crate) fn backward(&self, trace: &MlpTrace, d_last_preact: Array2<f64>) -> (Vec<LayerGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dz = d_last_preact;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (g, d_in) = layer.backward_preact(trace.acts[i].view(), &dz);
            grads.push(g);
            if i > 0 {
                dz = self.layers[i - 1].output_grad_to_preact(&trace.acts[i], d_in);
            } else {
                dz = d_in;
            }
        }
        grads.reverse();
        (grads, dz)
    }
}

impl Layered for MlpModel {
    fn layers(&self) -> Vec<&DenseLayer> {
        self.layers.iter().collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.layers.iter_mut().collect()
    }
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
