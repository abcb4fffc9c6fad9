//! Discrete-time engine. Each step runs, in order: allocation, motion,
//! sensing and transmission, server ingest, metrics. Robots are visited in id
//! order throughout so a run is a pure function of config and weights.

use std::fmt::Write as _;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{link_report, transmit, ChannelError};
use crate::neural::{argmax_first, LabeledImageSet, MlpModel, VaeModel};
use crate::pathplan::OccupancyGrid;
use crate::semcom::{make_payload, raw_octet, Payload, PayloadKind, QuantSpec, SemcomError};
use crate::server::{allocate, apply_assignments, ingest, ClassificationResult, ServerError};
use crate::world::{build_world, Branch, DeviceId, RobotId, ScenarioConfig, World, WorldError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Payload(#[from] SemcomError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("branch {0} cannot be run alone; use compare")]
    AmbiguousBranch(Branch),
}

/// Trained networks and the latent quantizer shared by robots and server.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub vae: VaeModel,
    pub classifier: MlpModel,
    pub quant: QuantSpec,
}

impl Models {
    pub fn new(vae: VaeModel, classifier: MlpModel) -> Self {
        Self { vae, classifier, quant: QuantSpec::default() }
    }
}

/// Classifier accuracy on `data` after every image goes through a `kind`
/// payload round trip (encode, quantize, dequantize, decode for SemCom; 8-bit
/// pixels for Raw).
pub fn round_trip_accuracy(models: &Models, kind: PayloadKind, data: &LabeledImageSet) -> f64 {
    let q = &models.quant;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(1000) {
        let x = data.batch(chunk);
        let recon = match kind {
            PayloadKind::SemCom => {
                let z = models.vae.encode_mean(x.view()).mapv(|v| q.dequantize_value(q.quantize_value(v)));
                models.vae.decode(z.view())
            }
            PayloadKind::Raw => x.mapv(|p| raw_octet(p) as f64 / 255.0),
        };
        let logits = models.classifier.forward(recon.view());
        for (row, &i) in logits.rows().into_iter().zip(chunk) {
            if argmax_first(&row.to_vec()) == data.label(i) as usize {
                correct += 1;
            }
        }
    }
    if data.is_empty() {
        0.0
    } else {
        correct as f64 / data.len() as f64
    }
}

/// One transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub step: u64,
    pub branch: PayloadKind,
    pub robot_id: RobotId,
    pub device_id: DeviceId,
    pub payload_bits: u64,
    pub delivered: bool,
    pub cqi: u8,
    pub cumulative_bits: u64,
}

pub const METRICS_CSV_HEADER: &str = "step,branch,robot_id,device_id,payload_bits,delivered,cqi,cumulative_bits";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub branch: PayloadKind,
    pub seed: u64,
    pub n_robots: usize,
    pub n_devices: usize,
    pub steps_run: u64,
    pub total_bits: u64,
    pub transmissions: usize,
    pub failed_transmissions: usize,
    pub devices_classified: usize,
    /// Fraction of classified devices whose digit was predicted correctly.
    pub classification_accuracy: Option<f64>,
    /// Fraction of classified devices whose normal/abnormal status is right.
    pub status_accuracy: Option<f64>,
    pub completion_step: Option<u64>,
    pub total_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub branch: PayloadKind,
    pub seed: u64,
    pub n_robots: usize,
    pub n_devices: usize,
    pub records: Vec<TxRecord>,
    /// Delivered bits so far, one entry per completed step.
    pub cumulative_by_step: Vec<u64>,
    pub results: Vec<ClassificationResult>,
    pub completion_step: Option<u64>,
    pub total_distance_m: f64,
}

impl MetricsLog {
    fn new(branch: PayloadKind, config: &ScenarioConfig) -> Self {
        Self {
            branch,
            seed: config.seed,
            n_robots: config.n_robots,
            n_devices: config.n_devices,
            records: Vec::new(),
            cumulative_by_step: Vec::new(),
            results: Vec::new(),
            completion_step: None,
            total_distance_m: 0.0,
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.cumulative_by_step.last().copied().unwrap_or(0)
    }

    pub fn delivered(&self) -> impl Iterator<Item = &TxRecord> {
        self.records.iter().filter(|r| r.delivered)
    }

    pub fn summary(&self) -> RunSummary {
        let n = self.results.len();
        let frac = |k: usize| (n > 0).then(|| k as f64 / n as f64);
        RunSummary {
            branch: self.branch,
            seed: self.seed,
            n_robots: self.n_robots,
            n_devices: self.n_devices,
            steps_run: self.cumulative_by_step.len() as u64,
            total_bits: self.total_bits(),
            transmissions: self.records.len(),
            failed_transmissions: self.records.iter().filter(|r| !r.delivered).count(),
            devices_classified: n,
            classification_accuracy: frac(self.results.iter().filter(|r| r.correct).count()),
            status_accuracy: frac(self.results.iter().filter(|r| r.status_correct).count()),
            completion_step: self.completion_step,
            total_distance_m: self.total_distance_m,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * (self.records.len() + 1));
        s.push_str(METRICS_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.step, r.branch, r.robot_id, r.device_id, r.payload_bits, r.delivered, r.cqi, r.cumulative_bits
            )
            .unwrap();
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    pub fn csv_file_name(&self) -> String {
        format!("metrics_seed{}_{}.csv", self.seed, self.branch)
    }

    pub fn summary_file_name(&self) -> String {
        format!("summary_seed{}_{}.json", self.seed, self.branch)
    }
}

/// A running simulation owning its world.
#[derive(Debug)]
pub struct Simulation<'m> {
    world: World,
    grid: OccupancyGrid,
    models: &'m Models,
    branch: PayloadKind,
    /// Captured but not yet delivered payload per robot.
    pending: Vec<Option<Payload>>,
    log: MetricsLog,
    step: u64,
}

impl<'m> Simulation<'m> {
    pub fn new(world: World, models: &'m Models, branch: PayloadKind) -> Self {
        let grid = OccupancyGrid::rasterize(&world.config);
        let pending = vec![None; world.robots.len()];
        let log = MetricsLog::new(branch, &world.config);
        Self { world, grid, models, branch, pending, log, step: 0 }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.log.completion_step.is_some() || self.step >= self.world.config.total_steps()
    }

    /// Advance one step. Returns the bits delivered during it.
    pub fn step(&mut self) -> Result<u64, SimError> {
        self.step += 1;
        let step = self.step;
        let step_s = self.world.config.step_s;
        let start_bits = self.log.total_bits();
        let mut cumulative = start_bits;

        let assignments = allocate(&self.world, &self.grid);
        for a in &assignments {
            debug!("step {step}: robot {} -> device {} ({:.2} m)", a.robot_id, a.device_id, a.planned_path_cost_m);
        }
        apply_assignments(&mut self.world, &assignments)?;

        for id in 0..self.world.robots.len() as RobotId {
            self.world.advance_robot(id, step_s)?;
        }

        let mut delivered = Vec::new();
        for id in 0..self.world.robots.len() as RobotId {
            let payload = match self.pending[id as usize].take() {
                Some(p) => Some(p),
                None => self.capture(id)?,
            };
            let Some(payload) = payload else { continue };
            let robot = self.world.robot(id)?;
            let report = link_report(&self.world.config.radio, robot.position)?;
            let bits = payload.bit_count();
            let outcome = transmit(&report, bits + self.world.config.radio.header_overhead_bits, step_s);
            if outcome.delivered {
                cumulative += bits;
            }
            self.log.records.push(TxRecord {
                step,
                branch: self.branch,
                robot_id: id,
                device_id: payload.device_id(),
                payload_bits: bits,
                delivered: outcome.delivered,
                cqi: report.cqi,
                cumulative_bits: cumulative,
            });
            if outcome.delivered {
                delivered.push(payload);
            } else {
                self.pending[id as usize] = Some(payload);
            }
        }

        for payload in &delivered {
            let m = self.models;
            if let Some(result) = ingest(payload, &m.vae, &m.quant, &m.classifier, &mut self.world)? {
                self.log.results.push(result);
            }
            let robot = self.world.robot_mut(payload.robot_id())?;
            robot.assigned_device = None;
            robot.path.clear();
        }

        self.log.cumulative_by_step.push(cumulative);
        self.log.total_distance_m = self.world.robots.iter().map(|r| r.distance_traveled_m).sum();
        self.world.clock_s = step as f64 * step_s;
        if self.log.completion_step.is_none() && self.world.all_classified() {
            self.log.completion_step = Some(step);
            info!("{} branch: all {} devices classified at step {step}", self.branch, self.world.devices.len());
        }
        Ok(cumulative - start_bits)
    }

    /// Build a payload when the robot's assigned device is within sensing range.
    fn capture(&self, id: RobotId) -> Result<Option<Payload>, SimError> {
        let Some(device_id) = self.world.robot(id)?.assigned_device else { return Ok(None) };
        if !self.world.sense(id)?.contains(&device_id) {
            return Ok(None);
        }
        let device = self.world.device(device_id)?;
        let m = self.models;
        Ok(Some(make_payload(self.branch, device_id, id, &device.image, &m.vae, &m.quant)?))
    }

    pub fn run_to_end(mut self) -> Result<MetricsLog, SimError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.log)
    }
}

fn single_branch(branch: Branch) -> Result<PayloadKind, SimError> {
    match branch {
        Branch::SemCom => Ok(PayloadKind::SemCom),
        Branch::Raw => Ok(PayloadKind::Raw),
        Branch::Both => Err(SimError::AmbiguousBranch(Branch::Both)),
    }
}

/// Run one branch to completion or until the configured duration elapses.
/// `config.branch` must be `SemCom` or `Raw`; devices draw their images from `images`.
pub fn run(config: &ScenarioConfig, images: &LabeledImageSet, models: &Models) -> Result<MetricsLog, SimError> {
    let branch = single_branch(config.branch)?;
    let world = build_world(config, images)?;
    Simulation::new(world, models, branch).run_to_end()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub semcom: MetricsLog,
    pub raw: MetricsLog,
}

impl Comparison {
    /// Raw bits over SemCom bits; `None` when nothing was delivered.
    pub fn ratio(&self) -> Option<f64> {
        let a = self.semcom.total_bits();
        (a > 0).then(|| self.raw.total_bits() as f64 / a as f64)
    }

    pub fn report_json(&self) -> String {
        #[derive(Serialize)]
        struct Report {
            seed: u64,
            n_robots: usize,
            n_devices: usize,
            semcom_bits: u64,
            raw_bits: u64,
            ratio: Option<f64>,
            semcom: RunSummary,
            raw: RunSummary,
        }
        serde_json::to_string_pretty(&Report {
            seed: self.semcom.seed,
            n_robots: self.semcom.n_robots,
            n_devices: self.semcom.n_devices,
            semcom_bits: self.semcom.total_bits(),
            raw_bits: self.raw.total_bits(),
            ratio: self.ratio(),
            semcom: self.semcom.summary(),
            raw: self.raw.summary(),
        })
        .expect("report serializes")
    }
}

/// Run both branches on one seeded world. `config.branch` is ignored.
pub fn compare(config: &ScenarioConfig, images: &LabeledImageSet, models: &Models) -> Result<Comparison, SimError> {
    let world = build_world(config, images)?;
    let semcom = Simulation::new(world.clone(), models, PayloadKind::SemCom).run_to_end()?;
    let raw = Simulation::new(world, models, PayloadKind::Raw).run_to_end()?;
    Ok(Comparison { semcom, raw })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_devices: usize,
    pub semcom_bits: u64,
    pub raw_bits: u64,
    pub ratio: Option<f64>,
    pub semcom_classified: usize,
    pub raw_classified: usize,
}

/// Compare branches over several device counts, one thread per count.
pub fn sweep(
    config: &ScenarioConfig,
    images: &LabeledImageSet,
    models: &Models,
    device_counts: &[usize],
) -> Result<Vec<SweepPoint>, SimError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = device_counts
            .iter()
            .map(|&n| {
                let cfg = ScenarioConfig { n_devices: n, ..config.clone() };
                s.spawn(move || {
                    compare(&cfg, images, models).map(|c| SweepPoint {
                        n_devices: n,
                        semcom_bits: c.semcom.total_bits(),
                        raw_bits: c.raw.total_bits(),
                        ratio: c.ratio(),
                        semcom_classified: c.semcom.results.len(),
                        raw_classified: c.raw.results.len(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("n_devices,semcom_bits,raw_bits\n");
    for p in points {
        writeln!(s, "{},{},{}", p.n_devices, p.semcom_bits, p.raw_bits).unwrap();
    }
    s
}
