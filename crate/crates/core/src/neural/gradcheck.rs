use ndarray::Array2;

use super::train::{Objective, Trainable};
use super::NeuralError;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Number of parameters probed (all of them if the model has fewer).
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { epsilon: 1e-4, samples: 256, seed: 0 }
    }
}

/// Compare analytic gradients against central finite differences on a seeded
/// random subset of parameters. Returns the largest
/// `|g_a − g_n| / max(1e-8, |g_a| + |g_n|)`.
///
/// `noise` is held fixed across all evaluations so stochastic objectives are
/// differentiable functions of the parameters.
pub fn grad_check<M: Trainable + Clone>(
    model: &M,
    objective: Objective,
    x: &Array2<f64>,
    labels: &[u8],
    noise: Option<&Array2<f64>>,
    config: GradCheckConfig,
) -> Result<f64, NeuralError> {
    let (_, analytic) = model.loss_and_grads(&objective, x, labels, noise)?;

    // (layer, is_bias, flat index)
    let mut coords: Vec<(usize, bool, usize)> = Vec::new();
    for (li, layer) in model.layers().iter().enumerate() {
        coords.extend((0..layer.weights.len()).map(|i| (li, false, i)));
        coords.extend((0..layer.bias.len()).map(|i| (li, true, i)));
    }
    let mut rng = SimRng::derive(config.seed, 0x6C4E);
    rng.shuffle(&mut coords);
    coords.truncate(config.samples.min(coords.len()));

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for &(li, is_bias, i) in &coords {
        let original = read_param(&probe, li, is_bias, i);
        write_param(&mut probe, li, is_bias, i, original + config.epsilon);
        let plus = probe.loss_and_grads(&objective, x, labels, noise)?.0.total;
        write_param(&mut probe, li, is_bias, i, original - config.epsilon);
        let minus = probe.loss_and_grads(&objective, x, labels, noise)?.0.total;
        write_param(&mut probe, li, is_bias, i, original);

        let numeric = (plus - minus) / (2.0 * config.epsilon);
        let g = &analytic[li];
        let exact = if is_bias { g.bias[i] } else { g.weights.as_slice().expect("contiguous")[i] };
        let rel = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn read_param<M: Trainable>(model: &M, li: usize, is_bias: bool, i: usize) -> f64 {
    let layer = model.layers()[li];
    if is_bias {
        layer.bias[i]
    } else {
        layer.weights.as_slice().expect("contiguous")[i]
    }
}

fn write_param<M: Trainable>(model: &mut M, li: usize, is_bias: bool, i: usize, value: f64) {
    let mut layers = model.layers_mut();
    let layer = &mut layers[li];
    if is_bias {
        layer.bias[i] = value;
    } else {
        layer.weights.as_slice_mut().expect("contiguous")[i] = value;
    }
}
