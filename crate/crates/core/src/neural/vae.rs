use ndarray::{Array2, ArrayView2, Zip};

use super::layer::{Activation, DenseLayer, LayerGrad, Layered, MlpModel};
use super::train::LossParts;
use super::NeuralError;
use crate::rng::SimRng;

/// Latent width of the semantic codec.
pub const LATENT_DIM: usize = 20;

/// Reconstructions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the log terms.
pub const BCE_CLAMP: f64 = 1e-7;

/// Gaussian VAE: a ReLU trunk feeding linear mean and log-variance heads, and
/// a ReLU/sigmoid decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder_trunk: MlpModel,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    pub decoder: MlpModel,
}

impl VaeModel {
    /// The 784→400→(20, 20)→400→784 codec.
    pub fn standard(seed: u64) -> Self {
        Self::with_dims(784, 400, LATENT_DIM, seed)
    }

    pub fn with_dims(input: usize, hidden: usize, latent: usize, seed: u64) -> Self {
        let mut rng = SimRng::derive(seed, 0x7AE);
        let encoder_trunk = MlpModel { layers: vec![DenseLayer::init(input, hidden, Activation::ReLU, &mut rng)] };
        let mu_head = DenseLayer::init(hidden, latent, Activation::Identity, &mut rng);
        let logvar_head = DenseLayer::init(hidden, latent, Activation::Identity, &mut rng);
        let decoder = MlpModel::init(&[latent, hidden, input], Activation::ReLU, Activation::Sigmoid, &mut rng);
        Self { encoder_trunk, mu_head, logvar_head, decoder }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        self.encoder_trunk.check_chain()?;
        self.decoder.check_chain()?;
        let hidden = self.encoder_trunk.output_dim();
        for head in [&self.mu_head, &self.logvar_head] {
            if head.in_dim() != hidden {
                return Err(NeuralError::DimMismatch { expected: hidden, got: head.in_dim() });
            }
        }
        if self.logvar_head.out_dim() != self.mu_head.out_dim() {
            return Err(NeuralError::DimMismatch { expected: self.mu_head.out_dim(), got: self.logvar_head.out_dim() });
        }
        if self.decoder.input_dim() != self.latent_dim() {
            return Err(NeuralError::DimMismatch { expected: self.latent_dim(), got: self.decoder.input_dim() });
        }
        if self.decoder.output_dim() != self.input_dim() {
            return Err(NeuralError::DimMismatch { expected: self.input_dim(), got: self.decoder.output_dim() });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder_trunk.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_dim()
    }

    /// Posterior mean and log-variance for a batch.
    pub fn encode(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
        let h = self.encoder_trunk.forward(x);
        (self.mu_head.forward(h.view()), self.logvar_head.forward(h.view()))
    }

    /// Posterior mean only; this is what gets transmitted.
    pub fn encode_mean(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let h = self.encoder_trunk.forward(x);
        self.mu_head.forward(h.view())
    }

    pub fn decode(&self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        self.decoder.forward(z)
    }

    /// Batch-mean ELBO terms. With `noise` the latent is `μ + exp(½·logσ²)·ε`;
    /// without it the mean is decoded directly.
    pub fn loss(&self, x: &Array2<f64>, noise: Option<&Array2<f64>>, beta: f64) -> LossParts {
        self.loss_and_grads(x, noise, beta).0
    }

    pub(crate) fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        noise: Option<&Array2<f64>>,
        beta: f64,
    ) -> (LossParts, Vec<LayerGrad>) {
        let n = x.nrows() as f64;
        let trunk = self.encoder_trunk.forward_trace(x.clone());
        let h = trunk.output();
        let mu = self.mu_head.forward(h.view());
        let logvar = self.logvar_head.forward(h.view());
        let z = match noise {
            Some(eps) => {
                let mut z = mu.clone();
                Zip::from(&mut z).and(&logvar).and(eps).for_each(|z, &lv, &e| *z += (0.5 * lv).exp() * e);
                z
            }
            None => mu.clone(),
        };
        let dec = self.decoder.forward_trace(z);
        let x_hat = dec.output();

        let (recon, kl) = elbo_terms(x.view(), x_hat.view(), mu.view(), logvar.view());
        let parts = LossParts { total: (recon + beta * kl) / n, recon: recon / n, kl: kl / n };

        // Sigmoid + BCE: d/dz = x̂ − x (exact wherever the clamp is inactive).
        let d_dec = (x_hat - x) / n;
        let (dec_grads, dz) = self.decoder.backward(&dec, d_dec);

        let mut d_mu = dz.clone();
        Zip::from(&mut d_mu).and(&mu).for_each(|g, &m| *g += beta * m / n);
        let mut d_logvar = Array2::<f64>::zeros(logvar.raw_dim());
        Zip::from(&mut d_logvar).and(&logvar).for_each(|g, &lv| *g = beta * 0.5 * (lv.exp() - 1.0) / n);
        if let Some(eps) = noise {
            Zip::from(&mut d_logvar)
                .and(&dz)
                .and(&logvar)
                .and(eps)
                .for_each(|g, &d, &lv, &e| *g += d * e * 0.5 * (0.5 * lv).exp());
        }

        let (mu_grad, dh_mu) = self.mu_head.backward_preact(h.view(), &d_mu);
        let (lv_grad, dh_lv) = self.logvar_head.backward_preact(h.view(), &d_logvar);
        let dh = dh_mu + dh_lv;
        let trunk_last = self.encoder_trunk.layers.last().expect("non-empty trunk");
        let d_trunk = trunk_last.output_grad_to_preact(h, dh);
        let (trunk_grads, _) = self.encoder_trunk.backward(&trunk, d_trunk);

        let mut grads = trunk_grads;
        grads.push(mu_grad);
        grads.push(lv_grad);
        grads.extend(dec_grads);
        (parts, grads)
    }
}

impl Layered for VaeModel {
    fn layers(&self) -> Vec<&DenseLayer> {
        let mut v: Vec<&DenseLayer> = self.encoder_trunk.layers.iter().collect();
        v.push(&self.mu_head);
        v.push(&self.logvar_head);
        v.extend(self.decoder.layers.iter());
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut v: Vec<&mut DenseLayer> = self.encoder_trunk.layers.iter_mut().collect();
        v.push(&mut self.mu_head);
        v.push(&mut self.logvar_head);
        v.extend(self.decoder.layers.iter_mut());
        v
    }
}

/// `−½ Σ (1 + logσ² − μ² − σ²)` summed over all entries.
pub fn kl_divergence(mu: ArrayView2<'_, f64>, logvar: ArrayView2<'_, f64>) -> f64 {
    let mut kl = 0.0;
    Zip::from(mu).and(logvar).for_each(|&m, &lv| kl += -0.5 * (1.0 + lv - m * m - lv.exp()));
    kl
}

/// Summed binary cross-entropy and summed KL over a batch.
pub fn elbo_terms(
    x: ArrayView2<'_, f64>,
    x_hat: ArrayView2<'_, f64>,
    mu: ArrayView2<'_, f64>,
    logvar: ArrayView2<'_, f64>,
) -> (f64, f64) {
    let mut bce = 0.0;
    Zip::from(x).and(x_hat).for_each(|&t, &p| {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        bce -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    });
    (bce, kl_divergence(mu, logvar))
}
