//! Robot-to-server radio link model.
//!
//! The chain is distance → indoor path loss → SINR → CQI → MCS → rate. Path
//! loss uses the indoor-office line-of-sight form
//! `PL = 32.4 + 17.3·log10(d) + 20·log10(fc)` with `d` in meters (floored at
//! 1 m) and `fc` in GHz. Thermal noise is `-174 dBm/Hz + 10·log10(B) + NF`.
//! CQI is the highest index whose SINR threshold is met, and the CQI selects a
//! row of the 4-bit CQI table to give the spectral efficiency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

/// Number of non-zero CQI indices.
pub const CQI_LEVELS: usize = 15;

/// Thermal noise power spectral density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Model validity floor for the path loss distance.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive and finite, got {0}")]
    NonPositiveDistance(f64),
    #[error("bad CQI/MCS table: {0}")]
    BadTable(String),
    #[error("invalid radio parameters: {0}")]
    InvalidParams(String),
}

/// One row of the CQI → MCS table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    /// Bits per modulation symbol (2 = QPSK, 4 = 16QAM, 6 = 64QAM).
    pub modulation_order: u8,
    pub code_rate: f64,
    /// Bits/s/Hz.
    pub spectral_efficiency: f64,
}

const fn mcs(modulation_order: u8, rate_x1024: f64, spectral_efficiency: f64) -> McsEntry {
    McsEntry { modulation_order, code_rate: rate_x1024 / 1024.0, spectral_efficiency }
}

/// SINR thresholds (dB) for CQI 1..=15.
pub const DEFAULT_CQI_THRESHOLDS_DB: [f64; CQI_LEVELS] =
    [-6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1, 10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7];

/// The 4-bit CQI table with up to 64QAM.
pub const DEFAULT_MCS_TABLE: [McsEntry; CQI_LEVELS] = [
    mcs(2, 78.0, 0.1523),
    mcs(2, 120.0, 0.2344),
    mcs(2, 193.0, 0.3770),
    mcs(2, 308.0, 0.6016),
    mcs(2, 449.0, 0.8770),
    mcs(2, 602.0, 1.1758),
    mcs(4, 378.0, 1.4766),
    mcs(4, 490.0, 1.9141),
    mcs(4, 616.0, 2.4063),
    mcs(6, 466.0, 2.7305),
    mcs(6, 567.0, 3.3223),
    mcs(6, 666.0, 3.9023),
    mcs(6, 772.0, 4.5234),
    mcs(6, 873.0, 5.1152),
    mcs(6, 948.0, 5.5547),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    /// Aggregate interference power; `None` means no interferers.
    pub interference_dbm: Option<f64>,
    pub server_pos: Vec2,
    pub cqi_thresholds_db: Vec<f64>,
    pub mcs_table: Vec<McsEntry>,
    /// Extra bits charged per payload for protocol headers.
    pub header_overhead_bits: u64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 3.5,
            bandwidth_hz: 1.0e7,
            tx_power_dbm: 23.0,
            noise_figure_db: 7.0,
            interference_dbm: None,
            server_pos: Vec2::new(50.0, 50.0),
            cqi_thresholds_db: DEFAULT_CQI_THRESHOLDS_DB.to_vec(),
            mcs_table: DEFAULT_MCS_TABLE.to_vec(),
            header_overhead_bits: 0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let finite = [self.carrier_ghz, self.bandwidth_hz, self.tx_power_dbm, self.noise_figure_db];
        if finite.iter().any(|v| !v.is_finite()) || !self.server_pos.is_finite() {
            return Err(ChannelError::InvalidParams("non-finite radio parameter".into()));
        }
        if self.interference_dbm.is_some_and(|i| !i.is_finite()) {
            return Err(ChannelError::InvalidParams("non-finite interference".into()));
        }
        if self.carrier_ghz <= 0.0 {
            return Err(ChannelError::InvalidParams("carrier_ghz must be > 0".into()));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(ChannelError::InvalidParams("bandwidth_hz must be > 0".into()));
        }
        check_thresholds(&self.cqi_thresholds_db)?;
        check_mcs_table(&self.mcs_table)
    }

    pub fn noise_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Short human-readable profile name, e.g. `indoor-3.5GHz-10MHz`.
    pub fn profile_name(&self) -> String {
        format!("indoor-{}GHz-{}MHz", self.carrier_ghz, self.bandwidth_hz / 1.0e6)
    }
}

fn strictly_ascending(xs: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = xs.collect();
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), ChannelError> {
    if thresholds.len() != CQI_LEVELS {
        return Err(ChannelError::BadTable(format!("expected {CQI_LEVELS} CQI thresholds, got {}", thresholds.len())));
    }
    if !strictly_ascending(thresholds.iter().copied()) {
        return Err(ChannelError::BadTable("CQI thresholds must be strictly ascending".into()));
    }
    Ok(())
}

fn check_mcs_table(table: &[McsEntry]) -> Result<(), ChannelError> {
    if table.len() != CQI_LEVELS {
        return Err(ChannelError::BadTable(format!("expected {CQI_LEVELS} MCS entries, got {}", table.len())));
    }
    if !strictly_ascending(table.iter().map(|e| e.spectral_efficiency)) {
        return Err(ChannelError::BadTable("spectral efficiencies must be strictly ascending".into()));
    }
    if table.iter().any(|e| e.spectral_efficiency <= 0.0) {
        return Err(ChannelError::BadTable("spectral efficiencies must be positive".into()));
    }
    Ok(())
}

/// Indoor-office LOS path loss in dB. Distances in `(0, 1)` m are floored to 1 m.
pub fn path_loss_db(distance_m: f64, carrier_ghz: f64) -> Result<f64, ChannelError> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let d = distance_m.max(MIN_DISTANCE_M);
    Ok(32.4 + 17.3 * d.log10() + 20.0 * carrier_ghz.log10())
}

/// SINR in dB at `distance_m` from the server.
pub fn sinr_db(params: &RadioParams, distance_m: f64) -> Result<f64, ChannelError> {
    let pl = path_loss_db(distance_m, params.carrier_ghz)?;
    let noise_mw = 10f64.powf(params.noise_dbm() / 10.0);
    let interference_mw = params.interference_dbm.map_or(0.0, |i| 10f64.powf(i / 10.0));
    Ok(params.tx_power_dbm - pl - 10.0 * (noise_mw + interference_mw).log10())
}

/// Largest CQI whose threshold is met (threshold inclusive), or 0 when below all.
pub fn sinr_to_cqi(sinr_db: f64, thresholds: &[f64]) -> Result<u8, ChannelError> {
    check_thresholds(thresholds)?;
    Ok(thresholds.iter().take_while(|&&t| t <= sinr_db).count() as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub sinr_db: f64,
    /// 0 means out of range.
    pub cqi: u8,
    pub mcs: Option<McsEntry>,
    pub spectral_efficiency: f64,
    pub rate_bps: f64,
}

pub fn link_report(params: &RadioParams, robot_pos: Vec2) -> Result<LinkReport, ChannelError> {
    params.validate()?;
    // Co-located robot and server sit at the 1 m floor rather than erroring.
    let distance_m = robot_pos.distance(params.server_pos).max(MIN_DISTANCE_M);
    let path_loss_db = path_loss_db(distance_m, params.carrier_ghz)?;
    let sinr_db = sinr_db(params, distance_m)?;
    let cqi = sinr_to_cqi(sinr_db, &params.cqi_thresholds_db)?;
    let mcs = (cqi >= 1).then(|| params.mcs_table[cqi as usize - 1]);
    let spectral_efficiency = mcs.map_or(0.0, |m| m.spectral_efficiency);
    Ok(LinkReport {
        distance_m,
        path_loss_db,
        sinr_db,
        cqi,
        mcs,
        spectral_efficiency,
        rate_bps: spectral_efficiency * params.bandwidth_hz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxOutcome {
    pub delivered: bool,
    pub bits_counted: u64,
    pub airtime_s: f64,
}

/// Attempt to send `payload_bits` within one step. Delivery is error-free once
/// the selected MCS can carry the payload inside the step; otherwise nothing is
/// counted and the caller retries on a later step.
pub fn transmit(report: &LinkReport, payload_bits: u64, step_s: f64) -> TxOutcome {
    if report.cqi == 0 || report.rate_bps <= 0.0 {
        return TxOutcome { delivered: false, bits_counted: 0, airtime_s: 0.0 };
    }
    let airtime_s = payload_bits as f64 / report.rate_bps;
    let delivered = payload_bits as f64 <= report.rate_bps * step_s;
    TxOutcome { delivered, bits_counted: if delivered { payload_bits } else { 0 }, airtime_s }
}
