//! Semantic codec and payload layer.
//!
//! Branch A (`SemCom`) sends the VAE posterior mean quantized to one octet per
//! latent dimension (20 octets, 160 bits). Branch B (`Raw`) sends every pixel
//! as an octet (784 octets, 6272 bits).

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{VaeModel, IMAGE_PIXELS, LATENT_DIM};
use crate::world::{DeviceId, RobotId};

pub const SEMCOM_BITS: u64 = (LATENT_DIM * 8) as u64;
pub const RAW_BITS: u64 = (IMAGE_PIXELS * 8) as u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemcomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("invalid quantizer: {0}")]
    InvalidQuantSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SemcomError> {
        if values.len() != LATENT_DIM {
            return Err(SemcomError::DimMismatch { expected: LATENT_DIM, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SemcomError::MalformedPayload("non-finite latent value".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform scalar quantizer over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantSpec {
    pub lo: f64,
    pub hi: f64,
    pub bits: u8,
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self { lo: -4.0, hi: 4.0, bits: 8 }
    }
}

impl QuantSpec {
    pub fn validate(&self) -> Result<(), SemcomError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(SemcomError::InvalidQuantSpec("need finite lo < hi".into()));
        }
        if self.bits != 8 {
            return Err(SemcomError::InvalidQuantSpec(format!(
                "only 8-bit quantization is supported, got {}",
                self.bits
            )));
        }
        Ok(())
    }

    /// Half a quantization step: the worst-case round-trip error for in-range values.
    pub fn max_error(&self) -> f64 {
        (self.hi - self.lo) / 255.0 / 2.0
    }

    pub fn quantize_value(&self, x: f64) -> u8 {
        // f64::round rounds half away from zero.
        ((x.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo) * 255.0).round() as u8
    }

    pub fn dequantize_value(&self, q: u8) -> f64 {
        self.lo + q as f64 / 255.0 * (self.hi - self.lo)
    }
}

pub fn quantize(latent: &LatentVector, spec: &QuantSpec) -> Vec<u8> {
    latent.values().iter().map(|&x| spec.quantize_value(x)).collect()
}

pub fn dequantize(octets: &[u8], spec: &QuantSpec) -> Result<LatentVector, SemcomError> {
    LatentVector::new(octets.iter().map(|&q| spec.dequantize_value(q)).collect())
}

fn check_image(image: &[f64]) -> Result<(), SemcomError> {
    if image.len() != IMAGE_PIXELS {
        return Err(SemcomError::DimMismatch { expected: IMAGE_PIXELS, got: image.len() });
    }
    Ok(())
}

/// Posterior mean of the VAE for one image.
pub fn encode(vae: &VaeModel, image: &[f64]) -> Result<LatentVector, SemcomError> {
    check_image(image)?;
    if vae.input_dim() != IMAGE_PIXELS || vae.latent_dim() != LATENT_DIM {
        return Err(SemcomError::DimMismatch { expected: LATENT_DIM, got: vae.latent_dim() });
    }
    let x = ArrayView2::from_shape((1, IMAGE_PIXELS), image).expect("length checked");
    LatentVector::new(vae.encode_mean(x).into_raw_vec_and_offset().0)
}

pub fn decode_latent(vae: &VaeModel, latent: &LatentVector) -> Vec<f64> {
    let z = ArrayView2::from_shape((1, LATENT_DIM), latent.values()).expect("latent length is fixed");
    vae.decode(z).into_raw_vec_and_offset().0
}

/// Transmission mode of a single payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    SemCom,
    Raw,
}

impl PayloadKind {
    pub fn code(self) -> u8 {
        match self {
            PayloadKind::SemCom => 1,
            PayloadKind::Raw => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(PayloadKind::SemCom),
            2 => Some(PayloadKind::Raw),
            _ => None,
        }
    }

    pub fn expected_len(self) -> usize {
        match self {
            PayloadKind::SemCom => LATENT_DIM,
            PayloadKind::Raw => IMAGE_PIXELS,
        }
    }
}

impl std::fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PayloadKind::SemCom => "SemCom",
            PayloadKind::Raw => "Raw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    branch: PayloadKind,
    device_id: DeviceId,
    robot_id: RobotId,
    bytes: Vec<u8>,
}

impl Payload {
    /// Checked constructor: the byte length must match the branch.
    pub fn new(
        branch: PayloadKind,
        device_id: DeviceId,
        robot_id: RobotId,
        bytes: Vec<u8>,
    ) -> Result<Self, SemcomError> {
        if bytes.len() != branch.expected_len() {
            return Err(SemcomError::MalformedPayload(format!(
                "{branch} payload must carry {} bytes, got {}",
                branch.expected_len(),
                bytes.len()
            )));
        }
        Ok(Self { branch, device_id, robot_id, bytes })
    }

    pub fn branch(&self) -> PayloadKind {
        self.branch
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn robot_id(&self) -> RobotId {
        self.robot_id
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_count(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }

    /// Wire layout: `u8 branch, u32 device_id, u32 robot_id, u16 length, bytes`, little-endian.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(11 + self.bytes.len());
        out.push(self.branch.code());
        out.extend_from_slice(&self.device_id.to_le_bytes());
        out.extend_from_slice(&self.robot_id.to_le_bytes());
        out.extend_from_slice(&(self.bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_wire(wire: &[u8]) -> Result<Self, SemcomError> {
        let bad = |m: &str| SemcomError::MalformedPayload(m.to_string());
        if wire.len() < 11 {
            return Err(bad("header truncated"));
        }
        let branch = PayloadKind::from_code(wire[0]).ok_or_else(|| bad("unknown branch code"))?;
        let device_id = u32::from_le_bytes(wire[1..5].try_into().unwrap());
        let robot_id = u32::from_le_bytes(wire[5..9].try_into().unwrap());
        let len = u16::from_le_bytes([wire[9], wire[10]]) as usize;
        if wire.len() != 11 + len {
            return Err(bad("length field does not match body"));
        }
        Self::new(branch, device_id, robot_id, wire[11..].to_vec())
    }
}

pub fn raw_octet(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn make_payload(
    branch: PayloadKind,
    device_id: DeviceId,
    robot_id: RobotId,
    image: &[f64],
    vae: &VaeModel,
    spec: &QuantSpec,
) -> Result<Payload, SemcomError> {
    check_image(image)?;
    let bytes = match branch {
        PayloadKind::SemCom => {
            spec.validate()?;
            quantize(&encode(vae, image)?, spec)
        }
        PayloadKind::Raw => image.iter().map(|&p| raw_octet(p)).collect(),
    };
    Payload::new(branch, device_id, robot_id, bytes)
}

/// Reconstruct an image in `[0, 1]` from a payload.
pub fn decode_payload(payload: &Payload, vae: &VaeModel, spec: &QuantSpec) -> Result<Vec<f64>, SemcomError> {
    if payload.bytes.len() != payload.branch.expected_len() {
        return Err(SemcomError::MalformedPayload("byte length does not match branch".into()));
    }
    match payload.branch {
        PayloadKind::SemCom => {
            spec.validate()?;
            Ok(decode_latent(vae, &dequantize(&payload.bytes, spec)?))
        }
        PayloadKind::Raw => Ok(payload.bytes.iter().map(|&b| b as f64 / 255.0).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(seed: u64) -> Vec<f64> {
        let mut r = crate::rng::SimRng::new(seed);
        (0..IMAGE_PIXELS).map(|_| r.next_f64()).collect()
    }

    #[test]
    fn quantizer_examples() {
        let s = QuantSpec::default();
        assert_eq!(s.quantize_value(-4.0), 0);
        assert_eq!(s.quantize_value(4.0), 255);
        assert_eq!(s.quantize_value(0.0), 128);
        assert!((s.dequantize_value(128) - 0.015_686_274_509_8).abs() < 1e-12);
        assert_eq!(s.quantize_value(10.0), 255);
        assert_eq!(s.quantize_value(-10.0), 0);
    }

    #[test]
    fn quant_spec_validation() {
        assert!(QuantSpec { lo: 1.0, hi: 1.0, bits: 8 }.validate().is_err());
        assert!(QuantSpec { bits: 4, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn payload_sizes_and_ratio() {
        let vae = VaeModel::standard(1);
        let img = image(1);
        let s = QuantSpec::default();
        let a = make_payload(PayloadKind::SemCom, 3, 1, &img, &vae, &s).unwrap();
        let b = make_payload(PayloadKind::Raw, 3, 1, &img, &vae, &s).unwrap();
        assert_eq!((a.bytes().len(), a.bit_count()), (20, 160));
        assert_eq!((b.bytes().len(), b.bit_count()), (784, 6272));
        assert_eq!(b.bit_count() as f64 / a.bit_count() as f64, 39.2);
        assert_eq!((SEMCOM_BITS, RAW_BITS), (160, 6272));
    }

    #[test]
    fn encode_is_deterministic_and_finite() {
        let vae = VaeModel::standard(2);
        let img = image(5);
        let a = encode(&vae, &img).unwrap();
        assert_eq!(a, encode(&vae, &img).unwrap());
        assert!(a.values().iter().all(|v| v.is_finite()));
        assert_eq!(encode(&vae, &img[..100]), Err(SemcomError::DimMismatch { expected: 784, got: 100 }));
    }

    #[test]
    fn raw_round_trip_within_half_step() {
        let vae = VaeModel::standard(1);
        let img = image(9);
        let s = QuantSpec::default();
        let p = make_payload(PayloadKind::Raw, 0, 0, &img, &vae, &s).unwrap();
        let back = decode_payload(&p, &vae, &s).unwrap();
        for (a, b) in img.iter().zip(&back) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn semcom_decode_in_unit_range() {
        let vae = VaeModel::standard(4);
        let s = QuantSpec::default();
        let p = make_payload(PayloadKind::SemCom, 0, 0, &image(2), &vae, &s).unwrap();
        let rec = decode_payload(&p, &vae, &s).unwrap();
        assert_eq!(rec.len(), IMAGE_PIXELS);
        assert!(rec.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn malformed_payloads_rejected() {
        assert!(matches!(Payload::new(PayloadKind::SemCom, 0, 0, vec![0; 19]), Err(SemcomError::MalformedPayload(_))));
        let mut wire = Payload::new(PayloadKind::SemCom, 0, 0, vec![0; 20]).unwrap().to_wire();
        wire.pop();
        assert!(Payload::from_wire(&wire).is_err());
        wire[0] = 9;
        assert!(Payload::from_wire(&wire).is_err());
    }

    #[test]
    fn wire_layout_is_bit_exact() {
        let p = Payload::new(PayloadKind::SemCom, 0x0102_0304, 7, (0..20).collect()).unwrap();
        let w = p.to_wire();
        assert_eq!(&w[..11], &[1, 4, 3, 2, 1, 7, 0, 0, 0, 20, 0]);
        assert_eq!(&w[11..], &(0..20).collect::<Vec<u8>>()[..]);
        assert_eq!(Payload::from_wire(&w).unwrap(), p);
    }

    proptest! {
        #[test]
        fn quantization_error_bound(x in -4.0f64..=4.0) {
            let s = QuantSpec::default();
            let back = s.dequantize_value(s.quantize_value(x));
            prop_assert!((back - x).abs() <= s.max_error() + 1e-9);
        }

        #[test]
        fn wire_round_trip(dev in any::<u32>(), rob in any::<u32>(), raw in any::<bool>(), fill in any::<u8>()) {
            let kind = if raw { PayloadKind::Raw } else { PayloadKind::SemCom };
            let p = Payload::new(kind, dev, rob, vec![fill; kind.expected_len()]).unwrap();
            prop_assert_eq!(Payload::from_wire(&p.to_wire()).unwrap(), p);
        }
    }
}
