//! Closed-loop simulation of occluded intersections.
//!
//! Agents drive their lanes at constant speed and never react to the ego.
//! The ego senses buildings and agent bodies by ray casting, replans every
//! `T_r` and holds the command in between.

mod batch;
mod episode;
mod map;
mod scenario;
mod world;

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsError;
use crate::geometry::{GeometryError, Lane, ObbBox};
use crate::planner::{PlannerConfig, PlannerError};
use crate::risk::RiskConfig;

pub use batch::{episode_seed, median, run_batch, BatchEpisode, BatchReport, MapRate};
pub use episode::{
    perceive, run_episode, EpisodeResult, EpisodeSummary, EpisodeTrace, Observer, Outcome,
    Perception, TraceRow,
};
pub use map::{synthetic_intersection, EgoTurn, LayoutConfig, Map};
pub use scenario::{randomize_scenario, AgentSpec, EgoRoute, Scenario, MAX_PLACEMENT_ROUNDS};
pub use world::{World, WorldState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown lane {0:?}")]
    UnknownLane(String),
    #[error("could not place agents without overlap after {rounds} rounds")]
    PlacementFailure { rounds: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Simulation and scenario-generation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sim_dt: f64,
    pub max_time: f64,
    pub sensor_range: f64,
    pub n_rays: usize,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Let detected agents on crossing lanes block the lane stretch they
    /// will cover within `occupancy_horizon`.
    pub track_visible_agents: bool,
    pub occupancy_horizon: f64,
    /// Ego start, measured back from the first conflict point (m).
    pub ego_start_distance: f64,
    /// Goal, measured past the first conflict point (m).
    pub goal_distance: f64,
    pub ego_start_v: f64,
    pub agent_speed_min: f64,
    pub agent_speed_max: f64,
    /// Agents reach their conflict point uniformly within this delay (s).
    pub arrival_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sim_dt: 0.05,
            max_time: 30.0,
            sensor_range: 60.0,
            n_rays: 720,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            track_visible_agents: true,
            occupancy_horizon: 3.0,
            ego_start_distance: 35.0,
            goal_distance: 20.0,
            ego_start_v: 9.0,
            agent_speed_min: 4.0,
            agent_speed_max: 12.0,
            arrival_window: 12.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.sim_dt > 0.0 && self.max_time > 0.0 && self.max_time.is_finite()) {
            return bad("sim_dt and max_time must be positive");
        }
        if !(self.sensor_range > 0.0 && self.sensor_range.is_finite()) {
            return bad("sensor_range must be positive");
        }
        if self.n_rays < crate::geometry::MIN_RAYS {
            return bad("n_rays is too small");
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return bad("vehicle dimensions must be positive");
        }
        if !(self.occupancy_horizon >= 0.0) {
            return bad("occupancy_horizon must be non-negative");
        }
        if !(self.ego_start_distance > 0.0 && self.goal_distance > 0.0 && self.ego_start_v >= 0.0) {
            return bad("ego route distances must be positive and ego_start_v non-negative");
        }
        if !(self.agent_speed_min >= 0.0 && self.agent_speed_min <= self.agent_speed_max) {
            return bad("agent speeds need 0 <= agent_speed_min <= agent_speed_max");
        }
        if !(self.arrival_window >= 0.0 && self.arrival_window.is_finite()) {
            return bad("arrival_window must be non-negative");
        }
        Ok(())
    }
}

/// Everything an episode needs besides the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub risk: RiskConfig,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
}

impl Settings {
    pub fn validate(&self) -> Result<(), SimError> {
        self.risk.validate().map_err(PlannerError::from)?;
        self.planner.validate()?;
        self.sim.validate()
    }
}

/// Vehicle box centered at arc length `s`, grown by `inflate` on every side.
pub fn footprint(lane: &Lane, s: f64, cfg: &SimConfig, inflate: f64) -> Result<ObbBox, SimError> {
    let pose = lane.extrapolated_pose(s);
    Ok(ObbBox::new(
        pose.position(),
        (
            0.5 * cfg.vehicle_length + inflate,
            0.5 * cfg.vehicle_width + inflate,
        ),
        pose.heading,
    )?)
}
