//! Simulated environment: geometry, walls, devices, robots and local sensing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RadioParams;
use crate::geometry::{Rect, Vec2};
use crate::neural::{LabeledImageSet, IMAGE_PIXELS};
use crate::rng::SimRng;

/// Attempts per entity before placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Minimum per-axis clearance between a device or robot and any wall or the outer boundary.
pub const WALL_CLEARANCE_M: f64 = 1.0;
/// Minimum spacing between two devices.
pub const DEVICE_SPACING_M: f64 = 2.0;

const PLACEMENT_STREAM: u64 = 0x9_1ACE;

pub type DeviceId = u32;
pub type RobotId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("could not place {entity} after {attempts} attempts")]
    PlacementFailure { entity: String, attempts: usize },
    #[error("image source holds {available} images, {needed} needed")]
    InsufficientImages { needed: usize, available: usize },
    #[error("unknown robot {0}")]
    UnknownRobot(RobotId),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Which payloads robots transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    SemCom,
    Raw,
    Both,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::SemCom => "SemCom",
            Branch::Raw => "Raw",
            Branch::Both => "Both",
        })
    }
}

/// How the server pairs idle robots with undetected devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SearchStrategy {
    /// Global greedy pairing on shortest planned path.
    #[default]
    NearestFirst,
    /// As `NearestFirst`, but each robot prefers devices in its own vertical strip of the area.
    SectorSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub n_robots: usize,
    pub n_devices: usize,
    pub walls: Vec<Rect>,
    pub sense_radius_m: f64,
    pub robot_speed_mps: f64,
    pub sim_duration_s: f64,
    pub step_s: f64,
    pub seed: u64,
    pub radio: RadioParams,
    pub branch: Branch,
    #[serde(default)]
    pub strategy: SearchStrategy,
}

impl Default for ScenarioConfig {
    /// 100 m × 100 m floor with four partition walls, 4 robots, 20 devices.
    fn default() -> Self {
        Self {
            width_m: 100.0,
            height_m: 100.0,
            n_robots: 4,
            n_devices: 20,
            walls: default_walls(),
            sense_radius_m: 2.0,
            robot_speed_mps: 2.0,
            sim_duration_s: 400.0,
            step_s: 1.0,
            seed: 1,
            radio: RadioParams::default(),
            branch: Branch::Both,
            strategy: SearchStrategy::NearestFirst,
        }
    }
}

pub fn default_walls() -> Vec<Rect> {
    vec![
        Rect::new(25.0, 0.0, 26.0, 40.0),
        Rect::new(74.0, 60.0, 75.0, 100.0),
        Rect::new(10.0, 70.0, 40.0, 71.0),
        Rect::new(60.0, 29.0, 90.0, 30.0),
    ]
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if !(self.width_m > 0.0 && self.width_m.is_finite() && self.height_m > 0.0 && self.height_m.is_finite()) {
            return bad("width_m and height_m must be positive");
        }
        if self.n_robots == 0 {
            return bad("n_robots must be >= 1");
        }
        if self.n_devices == 0 {
            return bad("n_devices must be >= 1");
        }
        if !(self.sense_radius_m > 0.0 && self.sense_radius_m.is_finite()) {
            return bad("sense_radius_m must be positive");
        }
        if !(self.robot_speed_mps >= 0.0 && self.robot_speed_mps.is_finite()) {
            return bad("robot_speed_mps must be non-negative");
        }
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return bad("step_s must be positive");
        }
        if !(self.sim_duration_s >= 0.0 && self.sim_duration_s.is_finite()) {
            return bad("sim_duration_s must be non-negative");
        }
        let ratio = self.sim_duration_s / self.step_s;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad("sim_duration_s must be an integer multiple of step_s");
        }
        let bounds = Rect::new(0.0, 0.0, self.width_m, self.height_m);
        for (i, w) in self.walls.iter().enumerate() {
            if !w.is_well_formed() {
                return Err(WorldError::InvalidConfig(format!("wall {i} is malformed")));
            }
            if w.x_min < bounds.x_min || w.y_min < bounds.y_min || w.x_max > bounds.x_max || w.y_max > bounds.y_max {
                return Err(WorldError::InvalidConfig(format!("wall {i} lies outside the environment")));
            }
        }
        self.radio.validate().map_err(|e| WorldError::InvalidConfig(e.to_string()))
    }

    pub fn total_steps(&self) -> u64 {
        (self.sim_duration_s / self.step_s).round() as u64
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Clearance of `p` from every wall and from the outer boundary (per-axis).
    fn clearance(&self, p: Vec2) -> f64 {
        let boundary = p.x.min(self.width_m - p.x).min(p.y).min(self.height_m - p.y);
        self.walls.iter().map(|w| w.chebyshev_distance(p)).fold(boundary, f64::min)
    }

    pub fn inside_wall(&self, p: Vec2) -> bool {
        self.walls.iter().any(|w| w.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceStatus {
    Normal,
    Abnormal,
}

impl DeviceStatus {
    /// Even digits flag a fault.
    pub fn from_digit(digit: u8) -> Self {
        if digit.is_multiple_of(2) {
            DeviceStatus::Abnormal
        } else {
            DeviceStatus::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceState {
    Undetected,
    Assigned,
    Classified { predicted_status: DeviceStatus, predicted_digit: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: DeviceId,
    pub position: Vec2,
    /// 28×28 grayscale, row-major, values in `[0, 1]`.
    pub image: Vec<f64>,
    pub true_digit: u8,
    pub true_status: DeviceStatus,
    pub state: DeviceState,
}

impl Device {
    pub fn is_classified(&self) -> bool {
        matches!(self.state, DeviceState::Classified { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub id: RobotId,
    pub position: Vec2,
    pub path: VecDeque<Vec2>,
    pub assigned_device: Option<DeviceId>,
    pub distance_traveled_m: f64,
}

impl Robot {
    pub fn is_idle(&self) -> bool {
        self.assigned_device.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: ScenarioConfig,
    pub devices: Vec<Device>,
    pub robots: Vec<Robot>,
    pub rng: SimRng,
    pub clock_s: f64,
}

fn sample_point(config: &ScenarioConfig, rng: &mut SimRng) -> Vec2 {
    Vec2::new(rng.uniform(0.0, config.width_m), rng.uniform(0.0, config.height_m))
}

/// Build a world by seeded rejection sampling.
///
/// Devices keep more than [`WALL_CLEARANCE_M`] per-axis clearance from walls and
/// the boundary and at least [`DEVICE_SPACING_M`] from each other; robots keep
/// the same wall clearance. Device images are drawn without replacement.
pub fn build_world(config: &ScenarioConfig, images: &LabeledImageSet) -> Result<World, WorldError> {
    config.validate()?;
    if images.len() < config.n_devices {
        return Err(WorldError::InsufficientImages { needed: config.n_devices, available: images.len() });
    }
    if images.images().ncols() != IMAGE_PIXELS {
        return Err(WorldError::InvalidConfig("image source must hold 28×28 images".into()));
    }
    let mut rng = SimRng::derive(config.seed, PLACEMENT_STREAM);

    let mut picks: Vec<usize> = (0..images.len()).collect();
    rng.shuffle(&mut picks);
    picks.truncate(config.n_devices);

    let mut devices: Vec<Device> = Vec::with_capacity(config.n_devices);
    for (i, &img) in picks.iter().enumerate() {
        let position = (0..MAX_PLACEMENT_ATTEMPTS)
            .map(|_| sample_point(config, &mut rng))
            .find(|&p| {
                config.clearance(p) > WALL_CLEARANCE_M
                    && devices.iter().all(|d| d.position.distance(p) >= DEVICE_SPACING_M)
            })
            .ok_or_else(|| WorldError::PlacementFailure {
                entity: format!("device {i}"),
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
        let digit = images.label(img);
        devices.push(Device {
            id: i as DeviceId,
            position,
            image: images.image(img).to_vec(),
            true_digit: digit,
            true_status: DeviceStatus::from_digit(digit),
            state: DeviceState::Undetected,
        });
    }

    let mut robots = Vec::with_capacity(config.n_robots);
    for i in 0..config.n_robots {
        let position = (0..MAX_PLACEMENT_ATTEMPTS)
            .map(|_| sample_point(config, &mut rng))
            .find(|&p| config.clearance(p) > WALL_CLEARANCE_M)
            .ok_or_else(|| WorldError::PlacementFailure {
                entity: format!("robot {i}"),
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
        robots.push(Robot {
            id: i as RobotId,
            position,
            path: VecDeque::new(),
            assigned_device: None,
            distance_traveled_m: 0.0,
        });
    }

    Ok(World { config: config.clone(), devices, robots, rng, clock_s: 0.0 })
}

impl World {
    pub fn robot(&self, id: RobotId) -> Result<&Robot, WorldError> {
        self.robots.get(id as usize).filter(|r| r.id == id).ok_or(WorldError::UnknownRobot(id))
    }

    pub fn robot_mut(&mut self, id: RobotId) -> Result<&mut Robot, WorldError> {
        self.robots.get_mut(id as usize).filter(|r| r.id == id).ok_or(WorldError::UnknownRobot(id))
    }

    pub fn device(&self, id: DeviceId) -> Result<&Device, WorldError> {
        self.devices.get(id as usize).filter(|d| d.id == id).ok_or(WorldError::UnknownDevice(id))
    }

    pub fn device_mut(&mut self, id: DeviceId) -> Result<&mut Device, WorldError> {
        self.devices.get_mut(id as usize).filter(|d| d.id == id).ok_or(WorldError::UnknownDevice(id))
    }

    pub fn all_classified(&self) -> bool {
        self.devices.iter().all(Device::is_classified)
    }

    pub fn classified_count(&self) -> usize {
        self.devices.iter().filter(|d| d.is_classified()).count()
    }

    /// Devices within the sensing radius (inclusive) that are not yet classified.
    pub fn sense(&self, robot_id: RobotId) -> Result<Vec<DeviceId>, WorldError> {
        let robot = self.robot(robot_id)?;
        let r = self.config.sense_radius_m;
        Ok(self
            .devices
            .iter()
            .filter(|d| !d.is_classified() && d.position.distance(robot.position) <= r)
            .map(|d| d.id)
            .collect())
    }

    /// Move a robot along its waypoint queue by `speed · dt_s` meters,
    /// stopping at the end of the path.
    pub fn advance_robot(&mut self, robot_id: RobotId, dt_s: f64) -> Result<Vec2, WorldError> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(WorldError::InvalidStep(dt_s));
        }
        let speed = self.config.robot_speed_mps;
        let robot = self.robot_mut(robot_id)?;
        let mut budget = speed * dt_s;
        while budget > 0.0 {
            let Some(&next) = robot.path.front() else { break };
            let seg = robot.position.distance(next);
            if seg <= budget {
                robot.position = next;
                robot.distance_traveled_m += seg;
                budget -= seg;
                robot.path.pop_front();
            } else {
                let f = budget / seg;
                robot.position = Vec2::new(
                    robot.position.x + (next.x - robot.position.x) * f,
                    robot.position.y + (next.y - robot.position.y) * f,
                );
                robot.distance_traveled_m += budget;
                budget = 0.0;
            }
        }
        Ok(robot.position)
    }
}
