//! Central server: payload reconstruction, digit classification, anomaly
//! status, and robot-to-device allocation.

use std::collections::VecDeque;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::neural::{argmax_first, MlpModel, VaeModel, IMAGE_PIXELS};
use crate::pathplan::{astar, path_to_waypoints, OccupancyGrid, PathCost};
use crate::semcom::{decode_payload, Payload, QuantSpec, SemcomError};
use crate::world::{DeviceId, DeviceState, DeviceStatus, RobotId, SearchStrategy, World, WorldError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServerError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Payload(#[from] SemcomError),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub digit: u8,
    pub status: DeviceStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub device_id: DeviceId,
    pub predicted_digit: u8,
    pub predicted_status: DeviceStatus,
    /// Predicted digit equals the device's true digit.
    pub correct: bool,
    /// Predicted normal/abnormal status equals the true status.
    pub status_correct: bool,
}

/// Arg-max digit (ties to the smaller digit) and its parity status.
pub fn classify(classifier: &MlpModel, image: &[f64]) -> Result<Classification, ServerError> {
    if image.len() != IMAGE_PIXELS || classifier.input_dim() != IMAGE_PIXELS {
        return Err(ServerError::DimMismatch { expected: IMAGE_PIXELS, got: image.len() });
    }
    let logits = classifier
        .forward_one(image)
        .map_err(|_| ServerError::DimMismatch { expected: IMAGE_PIXELS, got: image.len() })?;
    classify_logits(&logits)
}

pub fn classify_logits(logits: &[f64]) -> Result<Classification, ServerError> {
    if logits.len() != 10 {
        return Err(ServerError::DimMismatch { expected: 10, got: logits.len() });
    }
    let digit = argmax_first(logits) as u8;
    Ok(Classification { digit, status: DeviceStatus::from_digit(digit) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub robot_id: RobotId,
    pub device_id: DeviceId,
    pub planned_path_cost_m: f64,
    pub path_cost: PathCost,
    pub waypoints: Vec<Vec2>,
}

/// Vertical strip of the floor owned by robot `robot` under `SectorSweep`.
fn in_sector(world: &World, robot: RobotId, p: Vec2) -> bool {
    let n = world.robots.len().max(1) as f64;
    let width = world.config.width_m / n;
    let sector = ((p.x / width).floor() as usize).min(world.robots.len() - 1);
    sector == robot as usize
}

/// Greedy pairing of idle robots with undetected devices.
///
/// All reachable (idle robot, undetected device) pairs are ranked by planned
/// A* path cost, ties broken by robot id then device id, and taken in that
/// order whenever both members are still free. Under `SectorSweep` pairs
/// inside the robot's own strip rank ahead of all others.
pub fn allocate(world: &World, grid: &OccupancyGrid) -> Vec<Assignment> {
    struct Candidate {
        out_of_sector: bool,
        cost: PathCost,
        robot: RobotId,
        device: DeviceId,
        waypoints: Vec<Vec2>,
    }
    let sweep = world.config.strategy == SearchStrategy::SectorSweep;
    let mut candidates = Vec::new();
    for robot in world.robots.iter().filter(|r| r.is_idle()) {
        let Some(start) = grid.cell_of(robot.position) else {
            warn!("robot {} is off the grid", robot.id);
            continue;
        };
        for device in world.devices.iter().filter(|d| d.state == DeviceState::Undetected) {
            let Some(goal) = grid.cell_of(device.position) else { continue };
            match astar(grid, start, goal) {
                Ok(path) => candidates.push(Candidate {
                    out_of_sector: sweep && !in_sector(world, robot.id, device.position),
                    cost: path.cost,
                    robot: robot.id,
                    device: device.id,
                    waypoints: path_to_waypoints(&path, grid).expect("A* paths are non-empty"),
                }),
                Err(e) => debug!("robot {} cannot reach device {}: {e}", robot.id, device.id),
            }
        }
    }
    candidates.sort_by(|a, b| {
        (a.out_of_sector, a.cost, a.robot, a.device).cmp(&(b.out_of_sector, b.cost, b.robot, b.device))
    });

    let mut robot_taken = vec![false; world.robots.len()];
    let mut device_taken = vec![false; world.devices.len()];
    let mut out = Vec::new();
    for c in candidates {
        if robot_taken[c.robot as usize] || device_taken[c.device as usize] {
            continue;
        }
        robot_taken[c.robot as usize] = true;
        device_taken[c.device as usize] = true;
        out.push(Assignment {
            robot_id: c.robot,
            device_id: c.device,
            planned_path_cost_m: c.cost.cells() * grid.cell_size_m,
            path_cost: c.cost,
            waypoints: c.waypoints,
        });
    }
    out
}

/// Commit assignments: robots receive their paths and devices become `Assigned`.
pub fn apply_assignments(world: &mut World, assignments: &[Assignment]) -> Result<(), WorldError> {
    for a in assignments {
        world.device_mut(a.device_id)?.state = DeviceState::Assigned;
        let robot = world.robot_mut(a.robot_id)?;
        robot.assigned_device = Some(a.device_id);
        robot.path = VecDeque::from(a.waypoints.clone());
    }
    Ok(())
}

/// Reconstruct, classify and record a delivered payload. A payload for a
/// device that is already classified is ignored and yields `None`.
pub fn ingest(
    payload: &Payload,
    vae: &VaeModel,
    spec: &QuantSpec,
    classifier: &MlpModel,
    world: &mut World,
) -> Result<Option<ClassificationResult>, ServerError> {
    let id = payload.device_id();
    let device = world.device(id).map_err(|_| ServerError::UnknownDevice(id))?;
    if device.is_classified() {
        debug!("duplicate payload for device {id} ignored");
        return Ok(None);
    }
    let image = decode_payload(payload, vae, spec)?;
    let c = classify(classifier, &image)?;
    let device = world.device_mut(id).map_err(|_| ServerError::UnknownDevice(id))?;
    device.state = DeviceState::Classified { predicted_status: c.status, predicted_digit: c.digit };
    Ok(Some(ClassificationResult {
        device_id: id,
        predicted_digit: c.digit,
        predicted_status: c.status,
        correct: c.digit == device.true_digit,
        status_correct: c.status == device.true_status,
    }))
}
