//! `SEMW` weight files.
//!
//! ```text
//! "SEMW"  u16 version (=1)  u8 kind (1 = MLP, 2 = VAE)
//! block*: u16 layer count, then per layer:
//!         u32 rows, u32 cols, u8 activation,
//!         rows·cols f32 weights (row-major), rows f32 bias
//! ```
//!
//! All integers and floats are little-endian. An MLP file holds one block; a
//! VAE file holds four blocks in the order trunk, mean head, log-variance
//! head, decoder. Weights are stored as `f32`, so a round trip is exact for
//! models whose parameters are already `f32`-representable
//! (see [`Layered::round_to_f32`](super::Layered::round_to_f32)).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layer::{Activation, DenseLayer, MlpModel};
use super::vae::VaeModel;
use super::NeuralError;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SEMW";
pub const WEIGHTS_VERSION: u16 = 1;
const KIND_MLP: u8 = 1;
const KIND_VAE: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum SavedModel {
    Mlp(MlpModel),
    Vae(VaeModel),
}

impl SavedModel {
    pub fn into_mlp(self) -> Result<MlpModel, NeuralError> {
        match self {
            SavedModel::Mlp(m) => Ok(m),
            SavedModel::Vae(_) => Err(NeuralError::BadModelKind(KIND_VAE)),
        }
    }

    pub fn into_vae(self) -> Result<VaeModel, NeuralError> {
        match self {
            SavedModel::Vae(v) => Ok(v),
            SavedModel::Mlp(_) => Err(NeuralError::BadModelKind(KIND_MLP)),
        }
    }
}

fn put_block(out: &mut Vec<u8>, layers: &[&DenseLayer]) {
    out.extend_from_slice(&(layers.len() as u16).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
        out.push(l.activation.code());
        for &w in l.weights.iter() {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        for &b in l.bias.iter() {
            out.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
}

pub fn encode_weights(model: &SavedModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    match model {
        SavedModel::Mlp(m) => {
            out.push(KIND_MLP);
            put_block(&mut out, &m.layers.iter().collect::<Vec<_>>());
        }
        SavedModel::Vae(v) => {
            out.push(KIND_VAE);
            put_block(&mut out, &v.encoder_trunk.layers.iter().collect::<Vec<_>>());
            put_block(&mut out, &[&v.mu_head]);
            put_block(&mut out, &[&v.logvar_head]);
            put_block(&mut out, &v.decoder.layers.iter().collect::<Vec<_>>());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).ok_or(NeuralError::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(NeuralError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NeuralError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, NeuralError> {
        let b = self.take(n.checked_mul(4).ok_or(NeuralError::TruncatedFile)?)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
    }

    fn block(&mut self) -> Result<Vec<DenseLayer>, NeuralError> {
        let count = self.u16()? as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = self.u32()? as usize;
            let cols = self.u32()? as usize;
            let activation = Activation::from_code(self.u8()?)?;
            let weights = Array2::from_shape_vec((rows, cols), self.f32s(rows * cols)?)
                .map_err(|_| NeuralError::DimMismatch { expected: rows * cols, got: 0 })?;
            let bias = Array1::from(self.f32s(rows)?);
            layers.push(DenseLayer { weights, bias, activation });
        }
        Ok(layers)
    }
}

fn single(mut layers: Vec<DenseLayer>) -> Result<DenseLayer, NeuralError> {
    if layers.len() != 1 {
        return Err(NeuralError::DimMismatch { expected: 1, got: layers.len() });
    }
    Ok(layers.pop().unwrap())
}

pub fn decode_weights(bytes: &[u8]) -> Result<SavedModel, NeuralError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != WEIGHTS_MAGIC {
        return Err(NeuralError::BadMagic {
            expected: u32::from_be_bytes(*WEIGHTS_MAGIC),
            got: u32::from_be_bytes([magic[0], magic[1], magic[2], magic[3]]),
        });
    }
    let version = r.u16()?;
    if version != WEIGHTS_VERSION {
        return Err(NeuralError::VersionMismatch(version));
    }
    let model = match r.u8()? {
        KIND_MLP => SavedModel::Mlp(MlpModel::new(r.block()?)?),
        KIND_VAE => {
            let encoder_trunk = MlpModel::new(r.block()?)?;
            let mu_head = single(r.block()?)?;
            let logvar_head = single(r.block()?)?;
            let decoder = MlpModel::new(r.block()?)?;
            let vae = VaeModel { encoder_trunk, mu_head, logvar_head, decoder };
            vae.validate()?;
            SavedModel::Vae(vae)
        }
        other => return Err(NeuralError::BadModelKind(other)),
    };
    if r.pos != bytes.len() {
        return Err(NeuralError::TrailingData);
    }
    Ok(model)
}

pub fn save_weights(model: &SavedModel, path: &Path) -> Result<(), NeuralError> {
    fs::write(path, encode_weights(model))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<SavedModel, NeuralError> {
    decode_weights(&fs::read(path)?)
}
