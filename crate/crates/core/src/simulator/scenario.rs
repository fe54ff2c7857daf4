use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{footprint, Map, SimConfig, SimError};
use crate::geometry::obb_intersect;

pub const MAX_PLACEMENT_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoRoute {
    pub lane_id: String,
    pub start_s: f64,
    pub goal_s: f64,
}

/// A constant-speed agent. `start_s` may be negative (upstream of the
/// mapped lane) so hidden traffic can enter later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub lane_id: String,
    pub start_s: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub map: Map,
    pub ego_route: EgoRoute,
    pub ego_start_v: f64,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    /// Seeds the planner's random stream.
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.map.validate()?;
        let lane = self.map.lane(&self.ego_route.lane_id)?;
        let EgoRoute {
            start_s, goal_s, ..
        } = self.ego_route;
        if !(start_s >= 0.0 && start_s < goal_s && goal_s <= lane.length()) {
            return Err(SimError::InvalidScenario(format!(
                "ego route needs 0 <= start_s < goal_s <= {}",
                lane.length()
            )));
        }
        if !(self.ego_start_v >= 0.0 && self.ego_start_v.is_finite()) {
            return Err(SimError::InvalidScenario(
                "ego_start_v must be non-negative".into(),
            ));
        }
        for a in &self.agents {
            self.map.lane(&a.lane_id)?;
            if !(a.speed >= 0.0 && a.speed.is_finite() && a.start_s.is_finite()) {
                return Err(SimError::InvalidScenario(format!(
                    "agent on {:?} needs a finite non-negative speed",
                    a.lane_id
                )));
            }
        }
        Ok(())
    }

    /// Scenario on `map` with no agents and the ego route placed around the
    /// first conflict point of the ego lane.
    pub fn empty(map: Map, cfg: &SimConfig) -> Result<Self, SimError> {
        map.validate()?;
        let ego = map.ego_lane();
        let c = map.conflict_s(ego).unwrap_or(0.5 * ego.length());
        let start_s = (c - cfg.ego_start_distance).max(0.0);
        let goal_s = (c + cfg.goal_distance).min(ego.length());
        let route = EgoRoute {
            lane_id: ego.id().to_string(),
            start_s,
            goal_s,
        };
        let s = Self {
            map,
            ego_route: route,
            ego_start_v: cfg.ego_start_v,
            agents: Vec::new(),
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Places `n_agents` agents on random non-ego lanes. Each gets a speed
/// uniform in the configured range and a start chosen so that it reaches
/// the conflict point of its lane (or the lane middle) after a uniform
/// delay within the arrival window. Placements overlapping the ego or an
/// earlier agent are redrawn.
pub fn randomize_scenario<R: Rng + ?Sized>(
    map: &Map,
    n_agents: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Scenario, SimError> {
    let mut scenario = Scenario::empty(map.clone(), cfg)?;
    if n_agents == 0 {
        return Ok(scenario);
    }
    let ego_lane = map.ego_lane();
    let lanes = map.agent_lanes(ego_lane);
    if lanes.is_empty() {
        return Err(SimError::InvalidMap("no lanes available for agents".into()));
    }
    let ego_box = footprint(ego_lane, scenario.ego_route.start_s, cfg, 0.5)?;
    let mut boxes = vec![ego_box];
    for _ in 0..n_agents {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ROUNDS {
            let lane = lanes[rng.random_range(0..lanes.len())];
            let speed = rng.random_range(cfg.agent_speed_min..=cfg.agent_speed_max);
            let delay = rng.random_range(0.0..=cfg.arrival_window);
            let meet = lane.first_crossing(ego_lane).unwrap_or(0.5 * lane.length());
            let start_s = meet - speed * delay;
            let b = footprint(lane, start_s, cfg, 0.5)?;
            if boxes.iter().any(|o| obb_intersect(o, &b)) {
                continue;
            }
            boxes.push(b);
            scenario.agents.push(AgentSpec {
                lane_id: lane.id().to_string(),
                start_s,
                speed,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(SimError::PlacementFailure {
                rounds: MAX_PLACEMENT_ROUNDS,
            });
        }
    }
    Ok(scenario)
}
