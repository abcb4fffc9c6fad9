//! Dense-network substrate shared by the semantic codec (VAE) and the server
//! classifier: forward/backward passes with hand-derived gradients, seeded
//! initialization, SGD-with-momentum and Adam training, finite-difference
//! gradient checking and the `SEMW` weight file format.

mod data;
mod gradcheck;
mod layer;
mod train;
mod vae;
mod weights;

use thiserror::Error;

pub use data::{from_idx_bytes, load_idx, to_idx_bytes, LabeledImageSet, MnistPaths, IMAGE_PIXELS, IMAGE_SIDE};
pub use gradcheck::{grad_check, GradCheckConfig};
pub use layer::{argmax_first, Activation, DenseLayer, LayerGrad, Layered, MlpModel};
pub use train::{
    evaluate_accuracy, softmax_cross_entropy, train, EpochLoss, LossParts, Objective, Optimizer, TrainConfig,
    TrainReport, Trainable,
};
pub use vae::{elbo_terms, kl_divergence, VaeModel, BCE_CLAMP, LATENT_DIM};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, SavedModel, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("io error: {0}")]
    Io(String),
    #[error("bad magic: expected {expected:#010x}, got {got:#010x}")]
    BadMagic { expected: u32, got: u32 },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("file truncated")]
    TruncatedFile,
    #[error("unexpected trailing bytes after model data")]
    TrailingData,
    #[error("unsupported weights version {0}")]
    VersionMismatch(u16),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unknown activation code {0}")]
    BadActivation(u8),
    #[error("unknown model kind {0}")]
    BadModelKind(u8),
    #[error("label {0} out of range 0..=9")]
    BadLabel(u8),
    #[error("pixel value outside [0, 1]")]
    PixelOutOfRange,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("objective {objective} does not apply to this model")]
    ObjectiveMismatch { objective: &'static str },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    TrainingDiverged { epoch: usize },
}

impl From<std::io::Error> for NeuralError {
    fn from(e: std::io::Error) -> Self {
        NeuralError::Io(e.to_string())
    }
}
