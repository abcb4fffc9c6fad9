//! Planning agent: summarizes a scenario, asks a backend (rule-based or a
//! chat-completion service) for a deployment recommendation, validates it and
//! turns it into task and connectivity commands.
//!
//! The agent runs once at scenario setup; nothing here is consulted per step.

mod llm;

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::semcom::PayloadKind;
use crate::world::{Branch, ScenarioConfig, SearchStrategy, WorldError};

pub use llm::{plan_llm, ChatBackend, ChatMessage, HttpChatBackend, Plan, PlanSource, LLM_TIMEOUT};

pub const DEFAULT_MAX_ROBOTS: usize = 8;
/// Devices one robot is expected to cover in the rule-based plan.
pub const DEVICES_PER_ROBOT: usize = 5;

pub const OBJECTIVE: &str = "Find every IoT device on the floor, capture the digit on its display, and report \
whether it is normal (odd digit) or abnormal (even digit) while keeping the data sent over the radio link small.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request timed out")]
    Timeout,
    #[error("invalid recommendation: {0}")]
    InvalidRecommendation(String),
    #[error("commands do not yield a valid config: {0}")]
    InvalidCommands(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioSummary {
    pub profile: String,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
}

/// Structured scenario description; every field comes from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBrief {
    pub width_m: f64,
    pub height_m: f64,
    pub area_m2: f64,
    pub n_devices: usize,
    pub wall_count: usize,
    pub radio: RadioSummary,
    pub objective: String,
    pub max_robots: usize,
    pub duration_s: f64,
}

pub fn brief(config: &ScenarioConfig) -> ScenarioBrief {
    brief_with_limit(config, DEFAULT_MAX_ROBOTS)
}

pub fn brief_with_limit(config: &ScenarioConfig, max_robots: usize) -> ScenarioBrief {
    let r = &config.radio;
    ScenarioBrief {
        width_m: config.width_m,
        height_m: config.height_m,
        area_m2: config.width_m * config.height_m,
        n_devices: config.n_devices,
        wall_count: config.walls.len(),
        radio: RadioSummary {
            profile: r.profile_name(),
            carrier_ghz: r.carrier_ghz,
            bandwidth_mhz: r.bandwidth_hz / 1e6,
            tx_power_dbm: r.tx_power_dbm,
        },
        objective: OBJECTIVE.to_string(),
        max_robots: max_robots.max(1),
        duration_s: config.sim_duration_s,
    }
}

impl ScenarioBrief {
    /// Prompt text sent to a chat backend.
    pub fn render_prompt(&self) -> String {
        format!(
            "Scenario brief\n\
             - floor: {w} m x {h} m ({area} m2)\n\
             - IoT devices to inspect: {n}\n\
             - interior walls: {walls}\n\
             - radio: {profile}, carrier {fc} GHz, bandwidth {bw} MHz, robot transmit power {tx} dBm\n\
             - mission duration: {dur} s\n\
             - robots available: 1 to {max}\n\
             Objective: {obj}\n\n\
             Recommend a deployment. Reply with one JSON object and nothing else, with keys:\n\
             \"num_robots\" (integer from 1 to {max}), \
             \"search_strategy\" (\"NearestFirst\" or \"SectorSweep\"), \
             \"transmission_scheme\" (\"SemCom\" to send 20-byte latent codes or \"Raw\" to send 784-byte images), \
             \"rationale\" (short string).",
            w = self.width_m,
            h = self.height_m,
            area = self.area_m2,
            n = self.n_devices,
            walls = self.wall_count,
            profile = self.radio.profile,
            fc = self.radio.carrier_ghz,
            bw = self.radio.bandwidth_mhz,
            tx = self.radio.tx_power_dbm,
            dur = self.duration_s,
            max = self.max_robots,
            obj = self.objective,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub num_robots: usize,
    pub search_strategy: SearchStrategy,
    pub transmission_scheme: PayloadKind,
    pub rationale: String,
}

impl Recommendation {
    pub fn validate(&self, brief: &ScenarioBrief) -> Result<(), AgentError> {
        if self.num_robots == 0 || self.num_robots > brief.max_robots {
            return Err(AgentError::InvalidRecommendation(format!(
                "num_robots must be between 1 and {}, got {}",
                brief.max_robots, self.num_robots
            )));
        }
        Ok(())
    }
}

/// Deterministic planner: one robot per five devices, nearest-first search,
/// semantic transmission.
///
/// SemCom is chosen at every bandwidth. A raw-image plan only pays off when the
/// link is so wide that data volume is irrelevant, which this planner never assumes.
pub fn plan_rule_based(brief: &ScenarioBrief) -> Recommendation {
    let num_robots = brief.n_devices.div_ceil(DEVICES_PER_ROBOT).clamp(1, brief.max_robots.max(1));
    Recommendation {
        num_robots,
        search_strategy: SearchStrategy::NearestFirst,
        transmission_scheme: PayloadKind::SemCom,
        rationale: format!(
            "{num_robots} robot(s) for {} devices at about {DEVICES_PER_ROBOT} devices per robot; greedy nearest-first \
             allocation; 20-byte semantic payloads cut radio traffic by a factor of 39.2 over raw images",
            brief.n_devices
        ),
    }
}

/// Commands for the robot fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskCommand {
    Deploy { robots: usize, strategy: SearchStrategy },
    AssignmentPolicy(SearchStrategy),
}

/// Commands for the radio side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectivityCommand {
    SelectBranch(PayloadKind),
    RadioProfile(String),
}

fn strategy_slug(s: SearchStrategy) -> &'static str {
    match s {
        SearchStrategy::NearestFirst => "nearest-first",
        SearchStrategy::SectorSweep => "sector-sweep",
    }
}

impl fmt::Display for TaskCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskCommand::Deploy { robots, strategy } => {
                write!(f, "deploy {robots} robots, {}", strategy_slug(*strategy))
            }
            TaskCommand::AssignmentPolicy(s) => {
                write!(f, "assignment policy = greedy shortest path, {}", strategy_slug(*s))
            }
        }
    }
}

impl fmt::Display for ConnectivityCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectivityCommand::SelectBranch(k) => write!(f, "branch = {k}"),
            ConnectivityCommand::RadioProfile(p) => write!(f, "radio profile = {p}"),
        }
    }
}

fn as_display<S: Serializer, T: fmt::Display>(items: &[T], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(items.iter().map(|c| c.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandSet {
    #[serde(serialize_with = "as_display")]
    pub task_commands: Vec<TaskCommand>,
    #[serde(serialize_with = "as_display")]
    pub connectivity_commands: Vec<ConnectivityCommand>,
}

pub fn emit_commands(rec: &Recommendation, brief: &ScenarioBrief) -> CommandSet {
    CommandSet {
        task_commands: vec![
            TaskCommand::Deploy { robots: rec.num_robots, strategy: rec.search_strategy },
            TaskCommand::AssignmentPolicy(rec.search_strategy),
        ],
        connectivity_commands: vec![
            ConnectivityCommand::SelectBranch(rec.transmission_scheme),
            ConnectivityCommand::RadioProfile(brief.radio.profile.clone()),
        ],
    }
}

/// Apply a command set to a config and check the result.
pub fn apply_commands(config: &ScenarioConfig, commands: &CommandSet) -> Result<ScenarioConfig, AgentError> {
    let mut out = config.clone();
    for c in &commands.task_commands {
        match *c {
            TaskCommand::Deploy { robots, strategy } => {
                out.n_robots = robots;
                out.strategy = strategy;
            }
            TaskCommand::AssignmentPolicy(s) => out.strategy = s,
        }
    }
    for c in &commands.connectivity_commands {
        match c {
            ConnectivityCommand::SelectBranch(k) => {
                out.branch = match k {
                    PayloadKind::SemCom => Branch::SemCom,
                    PayloadKind::Raw => Branch::Raw,
                }
            }
            // The profile names the radio already in the config; nothing to change.
            ConnectivityCommand::RadioProfile(_) => {}
        }
    }
    out.validate()?;
    Ok(out)
}
